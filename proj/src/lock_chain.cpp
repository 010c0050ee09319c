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
#include "agile/lock_chain.hpp"

#include <algorithm>
#include <unordered_set>

namespace agile::lock {

bool LockChain::holds(LockId id) const noexcept {
  return std::find(held_.begin(), held_.end(), id) != held_.end();
}

std::string format_cycle_report(TaskId task, std::span<const LockId> cycle) {
  std::string out = "DEADLOCK: task " + std::to_string(task) + " cycle";
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    out += i == 0 ? " L" : " -> L";
    out += std::to_string(cycle[i]);
  }
  return out;
}

AgileLock& LockDetector::create_lock(std::string label) {
  const auto id = static_cast<LockId>(locks_.size());
  locks_.push_back(std::make_unique<AgileLock>(id));
  labels_.push_back(std::move(label));
  return *locks_.back();
}

std::size_t LockDetector::edge_count() const {
  std::lock_guard guard(graph_mutex_);
  std::size_t n = 0;
  for (const auto& [from, to] : depends_on_) n += to.size();
  return n;
}

AcquireResult LockDetector::acquire(AgileLock& lock, LockChain& chain) {
  const TaskId task = chain.task_;
  if (lock.try_acquire(task)) {
    chain.held_.push_back(lock.id_);
    if (debug_) {
      std::lock_guard guard(graph_mutex_);
      waiting_on_.erase(task);
    }
    return {AcquireStatus::acquired, {}};
  }
  if (!debug_) return {AcquireStatus::contended, {}};

  std::vector<LockId> cycle;
  {
    std::lock_guard guard(graph_mutex_);
    waiting_on_[task] = lock.id_;
    for (LockId held : chain.held_) depends_on_[held].insert(lock.id_);
    cycle = find_cycle(lock.id_, chain);
    if (cycle.empty()) return {AcquireStatus::contended, {}};

    // One re-check against live state: every edge X -> Y must still have the
    // holder of X waiting on Y. Dead edges found here are dropped.
    bool live = true;
    for (std::size_t i = 0; i + 1 < cycle.size(); ++i) {
      if (!edge_live(cycle[i], cycle[i + 1])) {
        depends_on_[cycle[i]].erase(cycle[i + 1]);
        live = false;
      }
    }
    if (!live) return {AcquireStatus::contended, {}};

    // Canonical rotation (smallest lock first) for de-duplication.
    std::vector<LockId> ring(cycle.begin(), cycle.end() - 1);
    std::rotate(ring.begin(), std::min_element(ring.begin(), ring.end()), ring.end());
    if (!reported_.emplace(kNoTask, ring).second) {
      return {AcquireStatus::would_deadlock, std::move(cycle)};
    }
    ++reports_;
  }
  if (reporter_) {
    reporter_(task, cycle);
  } else if (diag_ != nullptr) {
    *diag_ << format_cycle_report(task, cycle) << '\n';
  }
  return {AcquireStatus::would_deadlock, std::move(cycle)};
}

void LockDetector::release(AgileLock& lock, LockChain& chain) {
  auto it = std::find(chain.held_.begin(), chain.held_.end(), lock.id_);
  if (it == chain.held_.end() || !lock.release(chain.task_)) {
    throw NotHeld("task " + std::to_string(chain.task_) + " does not hold L" +
                  std::to_string(lock.id_));
  }
  chain.held_.erase(it);
}

void LockDetector::cancel_wait(TaskId task) {
  std::lock_guard guard(graph_mutex_);
  waiting_on_.erase(task);
}

bool LockDetector::edge_live(LockId from, LockId to) const {
  const TaskId holder = locks_.at(from)->holder();
  if (holder == kNoTask) return false;
  auto w = waiting_on_.find(holder);
  return w != waiting_on_.end() && w->second == to;
}

// Breadth-first walk of the dependency graph from `target`; stops at the
// first lock held by `chain`. Returns {held, target, ..., held} or empty.
std::vector<LockId> LockDetector::find_cycle(LockId target, const LockChain& chain) const {
  if (chain.holds(target)) return {target, target};
  std::unordered_map<LockId, LockId> parent;
  std::vector<LockId> frontier{target};
  std::unordered_set<LockId> seen{target};
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    const LockId cur = frontier[i];
    auto edges = depends_on_.find(cur);
    if (edges == depends_on_.end()) continue;
    for (LockId next : edges->second) {
      if (!seen.insert(next).second) continue;
      parent[next] = cur;
      if (chain.holds(next)) {
        std::vector<LockId> path{next};
        for (LockId p = next; p != target;) {
          p = parent.at(p);
          path.push_back(p);
        }
        std::vector<LockId> out{next};
        out.insert(out.end(), path.rbegin(), path.rend());
        return out;
      }
      frontier.push_back(next);
    }
  }
  return {};
}

}  // namespace agile::lock
