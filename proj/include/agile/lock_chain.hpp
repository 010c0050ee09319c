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
 * @file lock_chain.hpp
 * @brief Per-task lock chains and wait-for cycle detection.
 *
 * Every task carries a LockChain listing the locks it holds in acquisition
 * order. With debug mode on, a failed acquisition marks every held lock as
 * dependent on the target, then walks the dependency chain of the target;
 * reaching a lock the caller holds means a circular wait. The candidate cycle
 * is re-validated against the live holder/waiting state once before it is
 * reported, which filters edges left behind by waits that already ended.
 */
#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "agile/types.hpp"

namespace agile::lock {

using LockId = std::uint32_t;
using sim::TaskId;
using sim::kNoTask;

/// A mutual-exclusion word. Holder transitions are compare-and-swap so the
/// same object is usable from real threads.
class AgileLock {
 public:
  AgileLock() = default;
  explicit AgileLock(LockId id) : id_(id) {}
  AgileLock(const AgileLock&) = delete;
  AgileLock& operator=(const AgileLock&) = delete;

  LockId id() const noexcept { return id_; }
  TaskId holder() const noexcept { return holder_.load(std::memory_order_acquire); }
  bool is_free() const noexcept { return holder() == kNoTask; }

  bool try_acquire(TaskId task) noexcept {
    TaskId expected = kNoTask;
    return holder_.compare_exchange_strong(expected, task, std::memory_order_acq_rel);
  }
  /// Returns false if `task` was not the holder.
  bool release(TaskId task) noexcept {
    TaskId expected = task;
    return holder_.compare_exchange_strong(expected, kNoTask, std::memory_order_acq_rel);
  }

 private:
  friend class LockDetector;
  LockId id_ = 0;
  std::atomic<TaskId> holder_{kNoTask};
};

class LockChain {
 public:
  explicit LockChain(TaskId task = kNoTask) : task_(task) {}

  TaskId task() const noexcept { return task_; }
  std::span<const LockId> held() const noexcept { return held_; }
  bool empty() const noexcept { return held_.empty(); }
  std::size_t size() const noexcept { return held_.size(); }
  bool holds(LockId id) const noexcept;

 private:
  friend class LockDetector;
  TaskId task_;
  std::vector<LockId> held_;
};

enum class AcquireStatus { acquired, contended, would_deadlock };

struct AcquireResult {
  AcquireStatus status = AcquireStatus::acquired;
  /// For would_deadlock: the cycle as a lock path that starts and ends on the
  /// same lock, e.g. {3, 7, 3}.
  std::vector<LockId> cycle;

  bool acquired() const noexcept { return status == AcquireStatus::acquired; }
};

/// Formats `DEADLOCK: task <id> cycle L3 -> L7 -> L3`.
std::string format_cycle_report(TaskId task, std::span<const LockId> cycle);

class LockDetector {
 public:
  using Reporter = std::function<void(TaskId, std::span<const LockId>)>;

  explicit LockDetector(bool debug = true) : debug_(debug) {}

  /// Creates a lock owned by the detector; the reference stays valid for the
  /// detector's lifetime.
  AgileLock& create_lock(std::string label = {});
  AgileLock& lock(LockId id) { return *locks_.at(id); }
  const std::string& label(LockId id) const { return labels_.at(id); }
  std::size_t lock_count() const noexcept { return locks_.size(); }

  bool debug() const noexcept { return debug_; }
  void set_debug(bool on) noexcept { debug_ = on; }
  void set_reporter(Reporter r) { reporter_ = std::move(r); }
  /// Where formatted reports go when no reporter is installed.
  void set_diagnostic_stream(std::ostream* os) { diag_ = os; }

  /// Single attempt. A failure in debug mode records dependencies and runs
  /// cycle detection.
  AcquireResult acquire(AgileLock& lock, LockChain& chain);
  /// Throws NotHeld if the lock is not in the chain.
  void release(AgileLock& lock, LockChain& chain);
  /// Clears the record of what `task` is spinning on (it gave up waiting).
  void cancel_wait(TaskId task);

  /// Distinct cycles reported so far.
  std::uint64_t reports() const noexcept { return reports_; }
  /// Edges currently recorded (for pruning tests).
  std::size_t edge_count() const;

 private:
  std::vector<LockId> find_cycle(LockId target, const LockChain& chain) const;
  bool edge_live(LockId from, LockId to) const;

  bool debug_;
  std::deque<std::unique_ptr<AgileLock>> locks_;
  std::deque<std::string> labels_;
  mutable std::mutex graph_mutex_;
  std::unordered_map<LockId, std::set<LockId>> depends_on_;
  std::unordered_map<TaskId, LockId> waiting_on_;
  std::set<std::pair<TaskId, std::vector<LockId>>> reported_;
  std::uint64_t reports_ = 0;
  Reporter reporter_;
  std::ostream* diag_ = nullptr;
};

}  // namespace agile::lock
