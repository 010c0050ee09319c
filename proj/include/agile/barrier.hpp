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
#pragma once

#include <atomic>
#include <cstdint>

#include "agile/sim.hpp"

namespace agile::service {

enum class BarrierState : std::uint8_t { pending, done };

/// Completion flag of one transaction. Only the service completes it; the
/// issuer waits on it without holding any lock.
class TransactionBarrier {
 public:
  explicit TransactionBarrier(sim::Simulator& sim, sim::TaskId owner = sim::kNoTask)
      : sim_(&sim), owner_(owner), waiters_(sim) {}

  BarrierState state() const noexcept { return state_.load(std::memory_order_acquire); }
  bool done() const noexcept { return state() == BarrierState::done; }
  sim::TaskId owner() const noexcept { return owner_; }

  /// PENDING -> DONE; throws IllegalState if already DONE.
  void complete();
  /// DONE -> PENDING for buffer reuse; throws BufferBusy while PENDING.
  void rearm(sim::TaskId owner);

  std::uint32_t sq = 0;
  std::uint32_t sqe = 0;
  sim::SimTime armed_at = 0;

  struct Awaiter {
    TransactionBarrier& barrier;
    bool await_ready() const noexcept { return barrier.done(); }
    void await_suspend(std::coroutine_handle<> h) { barrier.waiters_.wait().await_suspend(h); }
    void await_resume() const noexcept {}
  };
  Awaiter wait() { return Awaiter{*this}; }

 private:
  sim::Simulator* sim_;
  sim::TaskId owner_;
  std::atomic<BarrierState> state_{BarrierState::done};
  sim::WaitQueue waiters_;
};

}  // namespace agile::service
