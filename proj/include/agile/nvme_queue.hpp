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

/**
 * @file nvme_queue.hpp
 * @brief NVMe submission/completion rings.
 *
 * Indices are kept as monotonically increasing 64-bit positions and reduced
 * modulo the (power-of-two) depth on access, so "full" and "empty" never
 * alias. A submission ring is full when tail - head == depth - 1. The command
 * identifier of an entry is its slot index, which keeps in-flight CIDs unique
 * per ring and makes CID -> slot lookup direct.
 *
 * Every state word changes by compare-and-swap so the rings can be driven by
 * real threads as well as by the simulator.
 */
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "agile/lock_chain.hpp"
#include "agile/types.hpp"

namespace agile::nvme {

enum class Opcode : std::uint8_t { read = 0, write = 1 };

const char* to_string(Opcode op);

struct NvmeCommand {
  Opcode opcode = Opcode::read;
  std::uint16_t cid = 0;
  std::uint32_t dev = 0;
  std::uint64_t blk = 0;
  /// Destination (read) or source (write) of one block.
  std::byte* dest = nullptr;
  std::uint32_t len = 0;
};

enum class SqeState : std::uint8_t { empty = 0, updated = 1, issued = 2 };

const char* to_string(SqeState s);

bool is_power_of_two(std::uint64_t v) noexcept;

class SubmissionQueue {
 public:
  SubmissionQueue(std::uint32_t sq_idx, std::uint32_t depth, lock::LockDetector& detector);

  std::uint32_t index() const noexcept { return idx_; }
  std::uint32_t depth() const noexcept { return depth_; }
  std::uint32_t capacity() const noexcept { return depth_ - 1; }

  std::uint64_t tail() const noexcept { return tail_.load(std::memory_order_acquire); }
  std::uint64_t head() const noexcept { return head_.load(std::memory_order_acquire); }
  std::uint64_t doorbell() const noexcept { return doorbell_.load(std::memory_order_acquire); }
  std::uint32_t in_use() const noexcept { return static_cast<std::uint32_t>(tail() - head()); }
  bool full() const noexcept { return in_use() >= capacity(); }

  /// Claims the next slot; nullopt when full. The returned position's slot
  /// index is also the command's CID.
  std::optional<std::uint64_t> try_reserve();
  /// Writes the command into a reserved slot; EMPTY -> UPDATED.
  void write_entry(std::uint64_t pos, NvmeCommand cmd);

  SqeState state(std::uint32_t slot) const noexcept {
    return entries_[slot].state.load(std::memory_order_acquire);
  }
  const NvmeCommand& command(std::uint32_t slot) const noexcept { return entries_[slot].cmd; }
  std::uint32_t slot_of(std::uint64_t pos) const noexcept { return static_cast<std::uint32_t>(pos & mask_); }

  lock::AgileLock& doorbell_lock() noexcept { return *doorbell_lock_; }

  struct ScanResult {
    std::uint64_t old_doorbell = 0;
    std::uint64_t new_doorbell = 0;
    std::uint32_t issued() const noexcept { return static_cast<std::uint32_t>(new_doorbell - old_doorbell); }
  };
  /// Caller holds the doorbell lock. Flips the UPDATED run starting at the
  /// doorbell to ISSUED and advances the doorbell past it.
  ScanResult scan_and_publish(const std::function<void(std::uint32_t slot)>& on_issue = {});

  /// ISSUED -> EMPTY; the head then moves over the contiguous EMPTY prefix.
  /// Throws ProtocolViolation on any other state.
  void release(std::uint32_t slot);

 private:
  struct Entry {
    NvmeCommand cmd;
    std::atomic<SqeState> state{SqeState::empty};
  };
  bool transition(std::uint32_t slot, SqeState from, SqeState to) noexcept;
  void advance_head() noexcept;

  std::uint32_t idx_;
  std::uint32_t depth_;
  std::uint64_t mask_;
  std::unique_ptr<Entry[]> entries_;
  std::atomic<std::uint64_t> tail_{0};
  std::atomic<std::uint64_t> head_{0};
  std::atomic<std::uint64_t> doorbell_{0};
  lock::AgileLock* doorbell_lock_;
};

struct CompletionEntry {
  std::uint16_t cid = 0;
  std::uint32_t sq_idx = 0;
  std::uint16_t status = 0;
  std::atomic<std::uint8_t> phase{0};
};

/// Phase value the device writes (and the host expects) at absolute
/// position `pos`: 1 on the first lap, flipping every lap.
inline std::uint8_t phase_for(std::uint64_t pos, std::uint32_t depth) noexcept {
  return ((pos / depth) & 1u) == 0 ? 1 : 0;
}

class CompletionQueue {
 public:
  static constexpr std::uint32_t kWindow = 32;

  CompletionQueue(std::uint32_t cq_idx, std::uint32_t depth);

  std::uint32_t index() const noexcept { return idx_; }
  std::uint32_t depth() const noexcept { return depth_; }

  // Device side.
  std::uint64_t device_tail() const noexcept { return dev_tail_; }
  std::uint64_t device_head() const noexcept { return dev_head_; }
  bool device_full() const noexcept { return dev_tail_ - dev_head_ >= depth_ - 1; }
  /// Writes the next CQE with the lap's phase. Caller checks device_full().
  std::uint64_t post(std::uint16_t cid, std::uint32_t sq_idx, std::uint16_t status);
  /// Host rang the CQ doorbell with a wrapped head value.
  void device_head_doorbell(std::uint32_t wrapped_head);

  const CompletionEntry& entry(std::uint64_t pos) const noexcept { return entries_[pos & (depth_ - 1)]; }
  bool is_new(std::uint64_t pos) const noexcept {
    return entry(pos).phase.load(std::memory_order_acquire) == phase_for(pos, depth_);
  }

  // Host (service) side; owned by one polling warp at a time.
  std::uint64_t poll_offset = 0;
  std::uint32_t poll_mask = 0;
  std::uint64_t host_head = 0;
  std::uint8_t expected_phase() const noexcept { return phase_for(poll_offset, depth_); }

 private:
  std::uint32_t idx_;
  std::uint32_t depth_;
  std::unique_ptr<CompletionEntry[]> entries_;
  std::uint64_t dev_tail_ = 0;
  std::uint64_t dev_head_ = 0;
};

/// Completion-side context of an in-flight command, indexed by CID.
struct InFlight {
  bool active = false;
  Opcode opcode = Opcode::read;
  BlockKey key;
  std::uint64_t issued_at = 0;
  sim::TaskId issuer = sim::kNoTask;
  std::function<void()> on_complete;
};

/// An SQ bound 1:1 to a CQ on one device.
struct QueuePair {
  QueuePair(std::uint32_t qp_idx, std::uint32_t dev, std::uint32_t sq_depth, std::uint32_t cq_depth,
            lock::LockDetector& detector);

  std::uint32_t idx;
  std::uint32_t dev;
  SubmissionQueue sq;
  CompletionQueue cq;
  std::vector<InFlight> inflight;
};

/// CQ depth used for an SQ of `sq_depth`: at least two polling windows,
/// a multiple of the window size, a power of two.
std::uint32_t cq_depth_for(std::uint32_t sq_depth) noexcept;

/// Initial SQ choice for a thread among `num_sqs` rings of a device.
inline std::uint32_t select_sq(std::uint32_t thread_idx, std::uint32_t num_sqs) noexcept {
  return thread_idx % num_sqs;
}
inline std::uint32_t next_sq(std::uint32_t sq, std::uint32_t num_sqs) noexcept { return (sq + 1) % num_sqs; }

}  // namespace agile::nvme
