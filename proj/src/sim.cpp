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
#include "agile/sim.hpp"

#include <algorithm>

namespace agile::sim {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::user_thread: return "user_thread";
    case TaskKind::service_warp: return "service_warp";
    case TaskKind::ssd_engine: return "ssd_engine";
    case TaskKind::host: return "host";
  }
  return "?";
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::quiescent: return "quiescent";
    case StopReason::time_limit: return "time_limit";
    case StopReason::livelock_suspected: return "livelock_suspected";
  }
  return "?";
}

Simulator::Simulator(SchedulerOptions options)
    : options_(options),
      rng_(options.seed),
      tie_rng_(options.seed ^ 0xA5A5'5A5A'F00D'BEEFull),
      trace_(&now_, &current_) {}

Simulator::~Simulator() { destroy_tasks(); }

void Simulator::destroy_tasks() {
  // Suspended coroutine frames are owned by their roots; destroying a root
  // unwinds every nested frame of the task.
  heap_.clear();
  actions_.clear();
  free_actions_.clear();
  roots_.clear();
}

// 4-ary min-heap on (at, tie, seq).
void Simulator::push(const Event& ev) {
  const Later later{};
  std::size_t i = heap_.size();
  heap_.push_back(ev);
  while (i > 0) {
    const std::size_t parent = (i - 1) / 4;
    if (!later(heap_[parent], ev)) break;
    heap_[i] = heap_[parent];
    i = parent;
  }
  heap_[i] = ev;
}

Simulator::Event Simulator::pop() {
  const Later later{};
  const Event top = heap_.front();
  const Event last = heap_.back();
  heap_.pop_back();
  const std::size_t n = heap_.size();
  if (n == 0) return top;
  std::size_t i = 0;
  for (;;) {
    const std::size_t first = 4 * i + 1;
    if (first >= n) break;
    std::size_t best = first;
    const std::size_t end = std::min(first + 4, n);
    for (std::size_t c = first + 1; c < end; ++c) {
      if (later(heap_[best], heap_[c])) best = c;
    }
    if (!later(last, heap_[best])) break;
    heap_[i] = heap_[best];
    i = best;
  }
  heap_[i] = last;
  return top;
}

EventId Simulator::schedule(SimTime delay_ns, std::function<void()> action, TaskId owner) {
  const EventId id = next_seq_++;
  const std::uint64_t tie = options_.randomize_ties ? tie_rng_() : 0;
  std::uint32_t slot;
  if (free_actions_.empty()) {
    slot = static_cast<std::uint32_t>(actions_.size());
    actions_.push_back(std::move(action));
  } else {
    slot = free_actions_.back();
    free_actions_.pop_back();
    actions_[slot] = std::move(action);
  }
  push(Event{now_ + delay_ns, tie, id, {}, owner, slot});
  return id;
}

EventId Simulator::schedule_resume(SimTime delay_ns, std::coroutine_handle<> h, TaskId owner) {
  const EventId id = next_seq_++;
  const std::uint64_t tie = options_.randomize_ties ? tie_rng_() : 0;
  if (owner != kNoTask) set_state(owner, TaskState::runnable);
  push(Event{now_ + delay_ns, tie, id, h, owner, kNoAction});
  return id;
}

Co<void> Simulator::root(Co<void> body, TaskId id) {
  try {
    co_await std::move(body);
  } catch (...) {
    if (!failure_) failure_ = std::current_exception();
  }
  tasks_[static_cast<std::size_t>(id)].state = TaskState::finished;
  finished_pending_.push_back(id);
  note_progress();
}

TaskId Simulator::spawn(TaskKind kind, std::string name, Co<void> body) {
  const auto id = static_cast<TaskId>(tasks_.size());
  tasks_.push_back(SimTask{id, kind, TaskState::runnable, std::move(name), true});
  roots_.emplace_back(root(std::move(body), id));
  schedule_resume(0, roots_.back()->handle(), id);
  return id;
}

TaskId Simulator::register_actor(TaskKind kind, std::string name) {
  const auto id = static_cast<TaskId>(tasks_.size());
  tasks_.push_back(SimTask{id, kind, TaskState::runnable, std::move(name), false});
  roots_.emplace_back(std::nullopt);
  return id;
}

void Simulator::set_state(TaskId id, TaskState state) {
  auto& t = tasks_.at(static_cast<std::size_t>(id));
  if (t.state != TaskState::finished) t.state = state;
}

std::uint32_t Simulator::unfinished_tasks() const {
  std::uint32_t n = 0;
  for (const auto& t : tasks_) {
    if (t.is_coroutine && t.state != TaskState::finished) ++n;
  }
  return n;
}

SimStats Simulator::run_until_quiescent(SimTime limit_ns) {
  SimStats stats;
  stats.stop_reason = StopReason::quiescent;
  const std::uint64_t start_events = processed_;
  while (!heap_.empty()) {
    if (heap_.front().at > limit_ns) {
      now_ = std::max(now_, limit_ns);
      stats.stop_reason = StopReason::time_limit;
      break;
    }
    if (since_progress_ > options_.livelock_budget) {
      stats.stop_reason = StopReason::livelock_suspected;
      break;
    }
    const Event ev = pop();
    now_ = ev.at;
    current_ = ev.owner;
    ++processed_;
    ++since_progress_;
    if (ev.handle) {
      ev.handle.resume();
    } else if (ev.action != kNoAction) {
      std::function<void()> fn = std::move(actions_[ev.action]);
      free_actions_.push_back(ev.action);
      if (fn) fn();
    }
    current_ = kNoTask;
    for (TaskId id : finished_pending_) roots_[static_cast<std::size_t>(id)].reset();
    finished_pending_.clear();
    if (failure_) {
      auto err = std::exchange(failure_, nullptr);
      std::rethrow_exception(err);
    }
  }
  stats.final_clock = now_;
  stats.events = processed_ - start_events;
  stats.tasks_blocked = unfinished_tasks();
  return stats;
}

void WaitQueue::Awaiter::await_suspend(std::coroutine_handle<> h) {
  const TaskId t = queue.sim_->current_task();
  queue.waiters_.emplace_back(t, h);
  if (t != kNoTask) queue.sim_->set_state(t, TaskState::blocked);
}

void WaitQueue::notify_all() {
  auto waiters = std::move(waiters_);
  waiters_.clear();
  for (auto& [task, h] : waiters) sim_->schedule_resume(0, h, task);
}

bool WaitQueue::notify_one() {
  if (waiters_.empty()) return false;
  auto [task, h] = waiters_.front();
  waiters_.pop_front();
  sim_->schedule_resume(0, h, task);
  return true;
}

Co<void> Barrier::arrive_and_wait() {
  if (++arrived_ == expected_) {
    arrived_ = 0;
    ++generation_;
    queue_.notify_all();
    co_return;
  }
  co_await queue_.wait();
}

}  // namespace agile::sim
