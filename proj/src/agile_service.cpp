/*
 * Copyright 2026 The agile-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "agile/agile_service.hpp"

#include <bit>
#include <string>

namespace agile::service {

void TransactionBarrier::complete() {
  BarrierState expected = BarrierState::pending;
  if (!state_.compare_exchange_strong(expected, BarrierState::done, std::memory_order_acq_rel)) {
    throw IllegalState("transaction barrier completed twice");
  }
  waiters_.notify_all();
}

void TransactionBarrier::rearm(sim::TaskId owner) {
  BarrierState expected = BarrierState::done;
  if (!state_.compare_exchange_strong(expected, BarrierState::pending, std::memory_order_acq_rel)) {
    throw BufferBusy("buffer reused while its transfer is still pending");
  }
  owner_ = owner;
  armed_at = sim_->now();
}

AgileService::AgileService(sim::Simulator& sim, ServiceConfig cfg, std::vector<nvme::QueuePair*> qps,
                           std::vector<ssd::SsdDevice*> devices)
    : sim_(sim), cfg_(cfg), qps_(std::move(qps)), devices_(std::move(devices)), idle_(sim) {
  if (cfg_.warps == 0) throw ConfigError("service.warps must be positive");
}

std::vector<std::uint32_t> AgileService::rotation(std::uint32_t warp) const {
  std::vector<std::uint32_t> out;
  for (std::size_t cq = warp; cq < qps_.size(); cq += cfg_.warps) out.push_back(static_cast<std::uint32_t>(cq));
  return out;
}

void AgileService::start() {
  if (running_ > 0) return;
  stop_ = false;
  const std::uint32_t warps = std::min<std::uint32_t>(cfg_.warps, static_cast<std::uint32_t>(qps_.size()));
  for (std::uint32_t w = 0; w < warps; ++w) {
    ++running_;
    sim_.spawn(sim::TaskKind::service_warp, "svc.warp" + std::to_string(w), warp_loop(w));
  }
}

void AgileService::request_stop() {
  stop_ = true;
  idle_.notify_all();
}

void AgileService::command_registered() {
  ++outstanding_;
  idle_.notify_all();
}

sim::Co<void> AgileService::warp_loop(std::uint32_t warp) {
  const auto cqs = rotation(warp);
  std::size_t i = 0;
  for (;;) {
    if (outstanding_ == 0) {
      if (stop_) break;
      co_await idle_.wait();
      continue;
    }
    cq_polling(cqs[i]);
    ++stats_.passes;
    i = (i + 1) % cqs.size();
    co_await sim_.sleep(cfg_.pass_ns);
  }
  for (std::uint32_t cq : cqs) drain(cq);
  --running_;
}

PollResult AgileService::cq_polling(std::uint32_t cq_idx) {
  nvme::QueuePair& qp = *qps_.at(cq_idx);
  nvme::CompletionQueue& cq = qp.cq;
  PollResult r;
  std::uint32_t mask = cq.poll_mask;
  for (std::uint32_t lane = 0; lane < nvme::CompletionQueue::kWindow; ++lane) {
    if (mask & (1u << lane)) continue;
    const std::uint64_t pos = cq.poll_offset + lane;
    if (process_cqe(cq_idx, pos, nvme::phase_for(pos, cq.depth()))) {
      mask |= 1u << lane;
      ++r.processed;
    }
  }
  if (mask == 0xFFFFFFFFu) {
    cq.poll_offset += nvme::CompletionQueue::kWindow;
    ring(qp, cq.poll_offset, nvme::CompletionQueue::kWindow, false);
    mask = 0;
    r.rang = true;
  }
  cq.poll_mask = mask;
  return r;
}

bool AgileService::process_cqe(std::uint32_t cq_idx, std::uint64_t pos, std::uint8_t phase) {
  nvme::QueuePair& qp = *qps_.at(cq_idx);
  const nvme::CompletionEntry& e = qp.cq.entry(pos);
  if (e.phase.load(std::memory_order_acquire) != phase) return false;
  const std::uint16_t cid = e.cid;
  if (e.sq_idx != qp.idx || cid >= qp.inflight.size() || !qp.inflight[cid].active) {
    throw UnknownCid("cq " + std::to_string(cq_idx) + " completion for cid " + std::to_string(cid) +
                     " with no command in flight");
  }
  nvme::InFlight ctx = std::move(qp.inflight[cid]);
  qp.inflight[cid] = nvme::InFlight{};
  qp.sq.release(cid);
  --outstanding_;
  ++stats_.completions;
  stats_.barrier_latency_sum_ns += sim_.now() - ctx.issued_at;
  ++stats_.barriers_completed;
  if (sim_.trace().enabled()) {
    sim_.trace().emit("svc", "cqe",
                      {{"cq", cq_idx}, {"pos", static_cast<std::int64_t>(pos)}, {"sq", qp.idx}, {"cid", cid},
                       {"dev", ctx.key.dev}, {"blk", static_cast<std::int64_t>(ctx.key.blk)},
                       {"op", static_cast<std::int64_t>(ctx.opcode)}});
    sim_.trace().emit("nvme", "release", {{"sq", qp.idx}, {"sqe", cid}});
  }
  if (ctx.on_complete) ctx.on_complete();
  sim_.note_progress();
  return true;
}

void AgileService::ring(nvme::QueuePair& qp, std::uint64_t new_head, std::uint32_t count, bool drain) {
  qp.cq.host_head = new_head;
  const auto wrapped = static_cast<std::uint32_t>(new_head & (qp.cq.depth() - 1));
  if (drain) {
    ++stats_.drain_rings;
    stats_.drained_entries += count;
  } else {
    ++stats_.windows_rung;
  }
  if (sim_.trace().enabled()) {
    sim_.trace().emit("svc", "cq_doorbell",
                      {{"cq", qp.idx}, {"head", static_cast<std::int64_t>(new_head)}, {"count", count}},
                      drain ? "drain" : std::string_view{});
  }
  devices_.at(qp.dev)->on_cq_doorbell(qp, wrapped);
}

std::uint32_t AgileService::drain(std::uint32_t cq_idx) {
  nvme::QueuePair& qp = *qps_.at(cq_idx);
  auto& cq = qp.cq;
  // Processed entries form a prefix of the window.
  const auto done = static_cast<std::uint32_t>(std::countr_one(cq.poll_mask));
  if (done == 0) return 0;
  if (done == nvme::CompletionQueue::kWindow) {
    throw ProtocolViolation("full window left unrung on cq " + std::to_string(cq_idx));
  }
  const std::uint64_t new_head = cq.poll_offset + done;
  ring(qp, new_head, done, true);
  // Continue the window after the drained prefix so a restarted service
  // resumes at the right entry.
  cq.poll_offset = new_head;
  cq.poll_mask = 0;
  return done;
}

}  // namespace agile::service
