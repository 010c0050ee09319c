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
#include "agile/nvme_queue.hpp"

#include <algorithm>
#include <string>

namespace agile::nvme {

const char* to_string(Opcode op) { return op == Opcode::read ? "READ" : "WRITE"; }

const char* to_string(SqeState s) {
  switch (s) {
    case SqeState::empty: return "EMPTY";
    case SqeState::updated: return "UPDATED";
    case SqeState::issued: return "ISSUED";
  }
  return "?";
}

bool is_power_of_two(std::uint64_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

std::uint32_t cq_depth_for(std::uint32_t sq_depth) noexcept {
  return std::max<std::uint32_t>(sq_depth, 2 * CompletionQueue::kWindow);
}

SubmissionQueue::SubmissionQueue(std::uint32_t sq_idx, std::uint32_t depth, lock::LockDetector& detector)
    : idx_(sq_idx), depth_(depth), mask_(depth - 1u), entries_(new Entry[depth]) {
  if (!is_power_of_two(depth) || depth < 2 || depth > 65536) {
    throw ConfigError("queue depth must be a power of two in [2, 65536], got " + std::to_string(depth));
  }
  doorbell_lock_ = &detector.create_lock("sq" + std::to_string(sq_idx) + ".doorbell");
}

std::optional<std::uint64_t> SubmissionQueue::try_reserve() {
  std::uint64_t t = tail_.load(std::memory_order_acquire);
  for (;;) {
    if (t - head_.load(std::memory_order_acquire) >= capacity()) return std::nullopt;
    if (tail_.compare_exchange_weak(t, t + 1, std::memory_order_acq_rel)) return t;
  }
}

bool SubmissionQueue::transition(std::uint32_t slot, SqeState from, SqeState to) noexcept {
  return entries_[slot].state.compare_exchange_strong(from, to, std::memory_order_acq_rel);
}

void SubmissionQueue::write_entry(std::uint64_t pos, NvmeCommand cmd) {
  const std::uint32_t slot = slot_of(pos);
  cmd.cid = static_cast<std::uint16_t>(slot);
  if (state(slot) != SqeState::empty) {
    throw ProtocolViolation("sq " + std::to_string(idx_) + " slot " + std::to_string(slot) +
                            " written while " + to_string(state(slot)));
  }
  entries_[slot].cmd = cmd;
  if (!transition(slot, SqeState::empty, SqeState::updated)) {
    throw ProtocolViolation("sq " + std::to_string(idx_) + " slot " + std::to_string(slot) + " lost EMPTY");
  }
}

SubmissionQueue::ScanResult SubmissionQueue::scan_and_publish(const std::function<void(std::uint32_t)>& on_issue) {
  ScanResult r;
  r.old_doorbell = doorbell_.load(std::memory_order_acquire);
  std::uint64_t pos = r.old_doorbell;
  const std::uint64_t t = tail_.load(std::memory_order_acquire);
  while (pos < t && transition(slot_of(pos), SqeState::updated, SqeState::issued)) {
    if (on_issue) on_issue(slot_of(pos));
    ++pos;
  }
  r.new_doorbell = pos;
  doorbell_.store(pos, std::memory_order_release);
  return r;
}

void SubmissionQueue::release(std::uint32_t slot) {
  if (!transition(slot, SqeState::issued, SqeState::empty)) {
    throw ProtocolViolation("sq " + std::to_string(idx_) + " release of slot " + std::to_string(slot) +
                            " in state " + to_string(state(slot)));
  }
  advance_head();
}

void SubmissionQueue::advance_head() noexcept {
  std::uint64_t h = head_.load(std::memory_order_acquire);
  for (;;) {
    if (h >= doorbell_.load(std::memory_order_acquire)) return;
    if (state(slot_of(h)) != SqeState::empty) return;
    if (head_.compare_exchange_weak(h, h + 1, std::memory_order_acq_rel)) ++h;
  }
}

CompletionQueue::CompletionQueue(std::uint32_t cq_idx, std::uint32_t depth)
    : idx_(cq_idx), depth_(depth), entries_(new CompletionEntry[depth]) {
  if (!is_power_of_two(depth) || depth % kWindow != 0) {
    throw ConfigError("completion queue depth must be a power-of-two multiple of 32");
  }
}

std::uint64_t CompletionQueue::post(std::uint16_t cid, std::uint32_t sq_idx, std::uint16_t status) {
  const std::uint64_t pos = dev_tail_++;
  auto& e = entries_[pos & (depth_ - 1)];
  e.cid = cid;
  e.sq_idx = sq_idx;
  e.status = status;
  e.phase.store(phase_for(pos, depth_), std::memory_order_release);
  return pos;
}

void CompletionQueue::device_head_doorbell(std::uint32_t wrapped_head) {
  const std::uint32_t cur = static_cast<std::uint32_t>(dev_head_ & (depth_ - 1));
  const std::uint32_t delta = (wrapped_head - cur) & (depth_ - 1);
  if (dev_head_ + delta > dev_tail_) {
    throw ProtocolViolation("cq " + std::to_string(idx_) + " head doorbell beyond posted entries");
  }
  dev_head_ += delta;
}

QueuePair::QueuePair(std::uint32_t qp_idx, std::uint32_t dev_idx, std::uint32_t sq_depth,
                     std::uint32_t cq_depth, lock::LockDetector& detector)
    : idx(qp_idx), dev(dev_idx), sq(qp_idx, sq_depth, detector), cq(qp_idx, cq_depth), inflight(sq_depth) {}

}  // namespace agile::nvme
