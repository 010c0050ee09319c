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
#include "agile/issuer.hpp"

#include <string>

namespace agile::nvme {

Issuer::Issuer(sim::Simulator& sim, TimingConfig timing, lock::LockDetector& detector,
               service::AgileService& service, std::vector<std::vector<QueuePair*>> qps_by_device,
               std::vector<ssd::SsdDevice*> devices)
    : sim_(sim),
      timing_(timing),
      detector_(detector),
      service_(service),
      qps_(std::move(qps_by_device)),
      devices_(std::move(devices)) {}

sim::Co<IssueReceipt> Issuer::submit(std::uint32_t thread_idx, IssueRequest req, lock::LockChain& chain) {
  if (req.key.dev >= qps_.size() || qps_[req.key.dev].empty()) {
    throw OutOfRange("no queue pair registered for device " + std::to_string(req.key.dev));
  }
  ssd::SsdDevice& dev = *devices_[req.key.dev];
  if (req.key.blk >= dev.num_blocks()) {
    throw OutOfRange("block " + std::to_string(req.key.blk) + " beyond device " + std::to_string(req.key.dev));
  }
  auto& rings = qps_[req.key.dev];
  const auto n = static_cast<std::uint32_t>(rings.size());

  // Attempt_Enqueue: pick an SQ by thread index, slide to the next on full.
  std::uint32_t sq = select_sq(thread_idx, n);
  std::uint32_t misses = 0;
  std::uint64_t pos = 0;
  for (;;) {
    if (auto p = rings[sq]->sq.try_reserve()) {
      pos = *p;
      break;
    }
    ++stats_.full_retries;
    sq = next_sq(sq, n);
    if (++misses % n == 0) co_await sim_.sleep(timing_.sq_full_backoff_ns);
  }
  QueuePair& qp = *rings[sq];
  const std::uint32_t slot = qp.sq.slot_of(pos);
  const auto cid = static_cast<std::uint16_t>(slot);

  if (req.barrier) {
    req.barrier->rearm(sim_.current_task());
    req.barrier->sq = qp.idx;
    req.barrier->sqe = slot;
  }
  InFlight& ctx = qp.inflight[slot];
  if (ctx.active) throw ProtocolViolation("cid " + std::to_string(cid) + " reused while in flight");
  ctx.active = true;
  ctx.opcode = req.opcode;
  ctx.key = req.key;
  ctx.issued_at = sim_.now();
  ctx.issuer = sim_.current_task();
  ctx.on_complete = [barrier = req.barrier, hook = std::move(req.on_complete)] {
    if (hook) hook();
    if (barrier) barrier->complete();
  };
  service_.command_registered();

  co_await sim_.sleep(timing_.sqe_write_ns);
  qp.sq.write_entry(pos, NvmeCommand{req.opcode, cid, req.key.dev, req.key.blk, req.buffer, dev.block_size()});
  ++stats_.enqueued;
  if (sim_.trace().enabled()) {
    sim_.trace().emit("nvme", "enqueue",
                      {{"sq", qp.idx}, {"sqe", slot}, {"cid", cid}, {"pos", static_cast<std::int64_t>(pos)},
                       {"dev", req.key.dev}, {"blk", static_cast<std::int64_t>(req.key.blk)},
                       {"op", static_cast<std::int64_t>(req.opcode)}});
  }

  // Attempt_SQDB until this entry is below the published doorbell.
  bool waited = false;
  for (;;) {
    if (qp.sq.doorbell() > pos) {
      ++stats_.issued_by_other;
      break;
    }
    auto got = detector_.acquire(qp.sq.doorbell_lock(), chain);
    if (got.acquired()) {
      auto scan = qp.sq.scan_and_publish([&](std::uint32_t s) {
        ++stats_.issued;
        if (sim_.trace().enabled()) sim_.trace().emit("nvme", "issue", {{"sq", qp.idx}, {"sqe", s}});
      });
      if (scan.issued() > 0) {
        ++stats_.doorbells;
        if (sim_.trace().enabled()) {
          sim_.trace().emit("nvme", "sq_doorbell",
                            {{"sq", qp.idx}, {"value", static_cast<std::int64_t>(scan.new_doorbell)},
                             {"count", scan.issued()}});
        }
        co_await sim_.sleep(timing_.doorbell_ns);
        dev.on_sq_doorbell(qp, static_cast<std::uint32_t>(scan.new_doorbell & (qp.sq.depth() - 1)));
      }
      detector_.release(qp.sq.doorbell_lock(), chain);
      if (qp.sq.doorbell() > pos) break;
    } else {
      waited = true;
    }
    ++stats_.doorbell_retries;
    co_await sim_.sleep(timing_.retry_ns);
  }
  if (waited) detector_.cancel_wait(chain.task());
  sim_.note_progress();
  co_return IssueReceipt{qp.idx, slot, cid};
}

}  // namespace agile::nvme
