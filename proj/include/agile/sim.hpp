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
 * @file sim.hpp
 * @brief Deterministic discrete-event substrate.
 *
 * Everything that "runs" in the model (GPU user threads, service warps, the
 * SSD engines) is a cooperative task scheduled against a virtual clock.
 * Tasks are C++20 coroutines (`Co<T>`); they suspend on `sleep()`, on a
 * `WaitQueue`, or on another `Co<T>`. The scheduler is single threaded and
 * orders events by (fire time, tie-break key, sequence number), so a given
 * seed and workload always replays the same trace.
 */
#pragma once

#include <coroutine>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "agile/trace.hpp"

namespace agile::sim {

enum class TaskKind { user_thread, service_warp, ssd_engine, host };
enum class TaskState { runnable, blocked, finished };
enum class StopReason { quiescent, time_limit, livelock_suspected };

const char* to_string(TaskKind kind);
const char* to_string(StopReason reason);

using EventId = std::uint64_t;

template <typename T = void>
class Co;

namespace detail {

struct FinalAwaiter {
  bool await_ready() const noexcept { return false; }
  template <typename Promise>
  std::coroutine_handle<> await_suspend(std::coroutine_handle<Promise> h) const noexcept {
    auto next = h.promise().continuation;
    return next ? next : std::noop_coroutine();
  }
  void await_resume() const noexcept {}
};

struct PromiseBase {
  std::coroutine_handle<> continuation;
  std::exception_ptr error;

  std::suspend_always initial_suspend() const noexcept { return {}; }
  FinalAwaiter final_suspend() const noexcept { return {}; }
  void unhandled_exception() noexcept { error = std::current_exception(); }
};

}  // namespace detail

/// Lazily started coroutine. Awaiting it runs the body to completion on the
/// awaiting task and yields its value (or rethrows its exception).
template <typename T>
class [[nodiscard]] Co {
 public:
  struct promise_type : detail::PromiseBase {
    std::optional<T> value;
    Co get_return_object() { return Co(std::coroutine_handle<promise_type>::from_promise(*this)); }
    template <typename U>
    void return_value(U&& v) {
      value.emplace(std::forward<U>(v));
    }
  };

  Co(Co&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  Co& operator=(Co&& other) noexcept {
    if (this != &other) {
      reset();
      handle_ = std::exchange(other.handle_, {});
    }
    return *this;
  }
  Co(const Co&) = delete;
  Co& operator=(const Co&) = delete;
  ~Co() { reset(); }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> caller) noexcept {
    handle_.promise().continuation = caller;
    return handle_;
  }
  T await_resume() {
    auto& p = handle_.promise();
    if (p.error) std::rethrow_exception(p.error);
    return std::move(*p.value);
  }

 private:
  explicit Co(std::coroutine_handle<promise_type> h) : handle_(h) {}
  void reset() {
    if (handle_) handle_.destroy();
    handle_ = {};
  }
  std::coroutine_handle<promise_type> handle_;
};

template <>
class [[nodiscard]] Co<void> {
 public:
  struct promise_type : detail::PromiseBase {
    Co get_return_object() { return Co(std::coroutine_handle<promise_type>::from_promise(*this)); }
    void return_void() noexcept {}
  };

  Co(Co&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  Co& operator=(Co&& other) noexcept {
    if (this != &other) {
      reset();
      handle_ = std::exchange(other.handle_, {});
    }
    return *this;
  }
  Co(const Co&) = delete;
  Co& operator=(const Co&) = delete;
  ~Co() { reset(); }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> caller) noexcept {
    handle_.promise().continuation = caller;
    return handle_;
  }
  void await_resume() {
    if (handle_.promise().error) std::rethrow_exception(handle_.promise().error);
  }

  std::coroutine_handle<> handle() const noexcept { return handle_; }

 private:
  explicit Co(std::coroutine_handle<promise_type> h) : handle_(h) {}
  void reset() {
    if (handle_) handle_.destroy();
    handle_ = {};
  }
  std::coroutine_handle<promise_type> handle_;
};

struct SimTask {
  TaskId id = kNoTask;
  TaskKind kind = TaskKind::user_thread;
  TaskState state = TaskState::runnable;
  std::string name;
  bool is_coroutine = false;
};

struct SimStats {
  SimTime final_clock = 0;
  std::uint64_t events = 0;
  std::uint32_t tasks_blocked = 0;
  StopReason stop_reason = StopReason::quiescent;
};

struct SchedulerOptions {
  std::uint64_t seed = 1;
  /// When set, events with equal fire time are ordered by a seeded random
  /// key instead of FIFO. Used to explore interleavings.
  bool randomize_ties = false;
  /// Events allowed without any task-state progress before the run is
  /// declared a suspected livelock.
  std::uint64_t livelock_budget = 20'000'000;
};

class Simulator {
 public:
  explicit Simulator(SchedulerOptions options = {});
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimTime now() const noexcept { return now_; }
  TaskId current_task() const noexcept { return current_; }

  /// Runs `action` at now + delay_ns on behalf of `owner`.
  EventId schedule(SimTime delay_ns, std::function<void()> action, TaskId owner = kNoTask);
  /// Resumes `h` at now + delay_ns, attributed to `owner`.
  EventId schedule_resume(SimTime delay_ns, std::coroutine_handle<> h, TaskId owner);

  /// Starts a coroutine task at the current instant.
  TaskId spawn(TaskKind kind, std::string name, Co<void> body);
  /// Registers a non-coroutine actor (e.g. an SSD engine) so its callbacks
  /// carry a task id in the trace.
  TaskId register_actor(TaskKind kind, std::string name);

  SimStats run_until_quiescent(SimTime limit_ns);
  /// Destroys every suspended task frame. Owners of objects referenced by
  /// task frames call this before tearing those objects down.
  void destroy_tasks();

  const SimTask& task(TaskId id) const { return tasks_.at(static_cast<std::size_t>(id)); }
  std::size_t task_count() const noexcept { return tasks_.size(); }
  std::uint32_t unfinished_tasks() const;
  void set_state(TaskId id, TaskState state);

  /// Resets the livelock counter; protocol modules call this on real work.
  void note_progress() noexcept { since_progress_ = 0; }

  Trace& trace() noexcept { return trace_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  std::uint64_t seed() const noexcept { return options_.seed; }

  struct SleepAwaiter {
    Simulator& sim;
    SimTime delay;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) { sim.schedule_resume(delay, h, sim.current_task()); }
    void await_resume() const noexcept {}
  };
  SleepAwaiter sleep(SimTime delay_ns) { return SleepAwaiter{*this, delay_ns}; }
  SleepAwaiter yield() { return SleepAwaiter{*this, 0}; }

 private:
  static constexpr std::uint32_t kNoAction = 0xFFFFFFFFu;
  // Kept trivially copyable; callbacks live in `actions_`.
  struct Event {
    SimTime at;
    std::uint64_t tie;
    EventId seq;
    std::coroutine_handle<> handle;
    TaskId owner;
    std::uint32_t action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.at != b.at) return a.at > b.at;
      if (a.tie != b.tie) return a.tie > b.tie;
      return a.seq > b.seq;
    }
  };

  Co<void> root(Co<void> body, TaskId id);
  void push(const Event& ev);
  Event pop();

  SchedulerOptions options_;
  SimTime now_ = 0;
  TaskId current_ = kNoTask;
  EventId next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t since_progress_ = 0;
  std::vector<Event> heap_;
  std::vector<std::function<void()>> actions_;
  std::vector<std::uint32_t> free_actions_;
  std::vector<SimTask> tasks_;
  std::vector<std::optional<Co<void>>> roots_;
  std::vector<TaskId> finished_pending_;
  std::exception_ptr failure_;
  std::mt19937_64 rng_;
  std::mt19937_64 tie_rng_;
  Trace trace_;
};

/// FIFO list of suspended tasks, woken explicitly.
class WaitQueue {
 public:
  explicit WaitQueue(Simulator& sim) : sim_(&sim) {}

  struct Awaiter {
    WaitQueue& queue;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h);
    void await_resume() const noexcept {}
  };
  Awaiter wait() { return Awaiter{*this}; }

  void notify_all();
  bool notify_one();
  std::size_t size() const noexcept { return waiters_.size(); }
  bool empty() const noexcept { return waiters_.empty(); }

 private:
  Simulator* sim_;
  std::deque<std::pair<TaskId, std::coroutine_handle<>>> waiters_;
};

/// Reusable rendezvous of a fixed number of tasks (a thread-block or warp
/// barrier).
class Barrier {
 public:
  Barrier(Simulator& sim, std::uint32_t expected) : queue_(sim), expected_(expected) {}
  Co<void> arrive_and_wait();
  std::uint32_t expected() const noexcept { return expected_; }
  std::uint64_t generation() const noexcept { return generation_; }

 private:
  WaitQueue queue_;
  std::uint32_t expected_;
  std::uint32_t arrived_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace agile::sim
