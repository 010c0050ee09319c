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
 * @file software_cache.hpp
 * @brief Block-granular write-back cache in (simulated) HBM.
 *
 * Lines move through INVALID, BUSY, READY and MODIFIED. An access resolves
 * to one of four cases:
 *
 *  - hit on a READY or MODIFIED line: data is usable now;
 *  - miss onto an INVALID line: a READ fill is issued and the line is BUSY;
 *  - hit on a BUSY line: the caller joins the line's waiter list, so a block
 *    is never fetched twice concurrently;
 *  - miss onto an occupied line: READY victims are reset, MODIFIED victims
 *    are written back first, BUSY victims are waited on or skipped according
 *    to the policy.
 *
 * Line state is only touched under the line lock, and the lock is never held
 * across a suspension.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "agile/barrier.hpp"
#include "agile/config.hpp"
#include "agile/issuer.hpp"
#include "agile/lock_chain.hpp"
#include "agile/sim.hpp"

namespace agile::cache {

enum class LineState : std::uint8_t { invalid = 0, busy = 1, ready = 2, modified = 3 };

const char* to_string(LineState s);

/// Called with the line's bytes once they are valid for the waiter's tag.
using Waiter = std::function<void(const std::byte* data)>;

struct CacheLine {
  std::uint32_t idx = 0;
  LineState state = LineState::invalid;
  std::optional<BlockKey> tag;
  std::vector<std::byte> data;
  std::vector<Waiter> waiters;
  /// Set while the in-flight command is an eviction write-back.
  bool writeback = false;
  lock::AgileLock* lock = nullptr;
  std::unique_ptr<sim::WaitQueue> settled;
};

class CachePolicy {
 public:
  explicit CachePolicy(BusyEvictionChoice choice = BusyEvictionChoice::wait) : choice_(choice) {}
  virtual ~CachePolicy() = default;

  /// Candidate line for `key`; nullopt if no line can currently be used.
  virtual std::optional<std::uint32_t> map(const BlockKey& key, const std::vector<CacheLine>& lines) = 0;
  /// Alternative after `rejected` was found BUSY. Default: next non-BUSY line.
  virtual std::optional<std::uint32_t> find_another(const BlockKey& key, std::uint32_t rejected,
                                                    const std::vector<CacheLine>& lines);
  virtual void on_hit(std::uint32_t /*line*/) {}
  virtual void on_miss(std::uint32_t /*line*/) {}

  BusyEvictionChoice busy_choice() const noexcept { return choice_; }
  void set_busy_choice(BusyEvictionChoice c) noexcept { choice_ = c; }

 private:
  BusyEvictionChoice choice_;
};

/// Fully associative clock replacement.
class ClockPolicy final : public CachePolicy {
 public:
  explicit ClockPolicy(std::size_t lines, BusyEvictionChoice choice = BusyEvictionChoice::wait);

  std::optional<std::uint32_t> map(const BlockKey& key, const std::vector<CacheLine>& lines) override;
  void on_hit(std::uint32_t line) override;
  void on_miss(std::uint32_t line) override;

  std::uint32_t hand() const noexcept { return hand_; }
  bool referenced(std::uint32_t line) const { return ref_.at(line) != 0; }

 private:
  std::mutex mu_;
  std::vector<std::uint8_t> ref_;
  std::uint32_t hand_ = 0;
};

/// Each block maps to exactly one line (hash modulo line count).
class DirectMappedPolicy final : public CachePolicy {
 public:
  using CachePolicy::CachePolicy;
  std::optional<std::uint32_t> map(const BlockKey& key, const std::vector<CacheLine>& lines) override;
};

enum class AccessKind { hit, filling, miss_fill_started };
enum class EvictResult { reset, writeback_started, deferred };

const char* to_string(AccessKind k);

struct AccessResult {
  AccessKind kind = AccessKind::hit;
  std::uint32_t line = 0;
};

struct CacheStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t joined = 0;
  std::uint64_t fills = 0;
  std::uint64_t writebacks = 0;
  std::uint64_t eager_writes = 0;
  std::uint64_t resets = 0;
  std::uint64_t deferred = 0;
  std::uint64_t propagations = 0;
};

class SoftwareCache {
 public:
  SoftwareCache(sim::Simulator& sim, std::uint64_t num_lines, std::uint32_t block_size, nvme::Issuer& issuer,
                lock::LockDetector& detector, std::unique_ptr<CachePolicy> policy);

  std::size_t num_lines() const noexcept { return lines_.size(); }
  std::uint32_t block_size() const noexcept { return block_size_; }
  const CacheLine& line(std::uint32_t idx) const { return lines_.at(idx); }
  const std::vector<CacheLine>& lines() const noexcept { return lines_; }
  CachePolicy& policy() noexcept { return *policy_; }
  std::optional<std::uint32_t> lookup(const BlockKey& key) const;

  /// Resolves an access. On FILLING or MISS_FILL_STARTED, `waiter` (if set)
  /// is queued on the line before the call returns.
  sim::Co<AccessResult> access(BlockKey key, std::uint32_t thread_idx, lock::LockChain& chain,
                               Waiter waiter = {});

  /// Full-block write: the bytes land in the line and a WRITE is issued at
  /// once. The returned barrier completes when the device has the data.
  sim::Co<std::shared_ptr<service::TransactionBarrier>> write_block(BlockKey key, const std::byte* src,
                                                                    std::uint32_t thread_idx,
                                                                    lock::LockChain& chain);

  /// Installs bytes handed back from a shared user buffer: a resident line
  /// is overwritten and left MODIFIED; otherwise the block is written through.
  sim::Co<void> propagate(BlockKey key, const std::byte* src, std::uint32_t thread_idx, lock::LockChain& chain);

  /// READY|MODIFIED -> MODIFIED. Throws IllegalState otherwise.
  void mark_modified(std::uint32_t line, lock::LockChain& chain);

  /// Eviction of one line.
  sim::Co<EvictResult> evict(std::uint32_t line, std::uint32_t thread_idx, lock::LockChain& chain);

  /// Writes back every MODIFIED line and waits until no line is BUSY.
  sim::Co<void> flush(std::uint32_t thread_idx, lock::LockChain& chain);

  /// Suspends until `line` is no longer BUSY.
  sim::Co<void> wait_settled(std::uint32_t line);

  const CacheStats& stats() const noexcept { return stats_; }

 private:
  enum class Intent { read, write };

  sim::Co<AccessResult> resolve(BlockKey key, std::uint32_t thread_idx, lock::LockChain& chain, Intent intent,
                                Waiter waiter, const std::byte* src,
                                std::shared_ptr<service::TransactionBarrier> durability);
  void lock_line(CacheLine& l, lock::LockChain& chain);
  void unlock_line(CacheLine& l, lock::LockChain& chain);
  void set_state(CacheLine& l, LineState to);
  /// Issues the write-back of a MODIFIED line (already moved to BUSY).
  sim::Co<void> start_writeback(CacheLine& l, bool evicting, std::uint32_t thread_idx, lock::LockChain& chain);
  void command_done(std::uint32_t idx);

  sim::Simulator& sim_;
  std::uint32_t block_size_;
  nvme::Issuer& issuer_;
  lock::LockDetector& detector_;
  std::unique_ptr<CachePolicy> policy_;
  std::vector<CacheLine> lines_;
  std::unordered_map<BlockKey, std::uint32_t, BlockKeyHash> directory_;
  sim::WaitQueue line_freed_;
  CacheStats stats_;
};

}  // namespace agile::cache
