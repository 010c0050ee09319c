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
#include <algorithm>
#include <atomic>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "agile/lock_chain.hpp"
#include "doctest.h"

using namespace agile;
using namespace agile::lock;

TEST_CASE("free lock is acquired and recorded in the chain") {
  LockDetector d;
  auto& l = d.create_lock("a");
  LockChain c(1);
  auto r = d.acquire(l, c);
  CHECK(r.acquired());
  CHECK(c.size() == 1);
  CHECK(c.holds(l.id()));
  CHECK(l.holder() == 1);
  d.release(l, c);
  CHECK(c.empty());
  CHECK(l.is_free());
}

TEST_CASE("releasing a lock that is not held throws NotHeld") {
  LockDetector d;
  auto& l = d.create_lock();
  LockChain a(1), b(2);
  CHECK_THROWS_AS(d.release(l, a), NotHeld);
  REQUIRE(d.acquire(l, a).acquired());
  CHECK_THROWS_AS(d.release(l, b), NotHeld);
}

TEST_CASE("release order does not have to mirror acquisition order") {
  LockDetector d;
  auto& x = d.create_lock();
  auto& y = d.create_lock();
  auto& z = d.create_lock();
  LockChain c(1);
  for (auto* l : {&x, &y, &z}) REQUIRE(d.acquire(*l, c).acquired());
  d.release(y, c);
  d.release(x, c);
  CHECK(c.held().size() == 1);
  CHECK(c.held()[0] == z.id());
  d.release(z, c);
  CHECK(c.empty());
}

TEST_CASE("two tasks waiting on each other form a reported cycle") {
  LockDetector d;
  std::ostringstream diag;
  d.set_diagnostic_stream(&diag);
  auto& l1 = d.create_lock();
  auto& l2 = d.create_lock();
  LockChain a(1), b(2);
  REQUIRE(d.acquire(l1, a).acquired());
  REQUIRE(d.acquire(l2, b).acquired());
  auto ra = d.acquire(l2, a);
  CHECK(ra.status == AcquireStatus::contended);
  auto rb = d.acquire(l1, b);
  CHECK(rb.status == AcquireStatus::would_deadlock);
  CHECK(rb.cycle == std::vector<LockId>{l2.id(), l1.id(), l2.id()});
  CHECK(d.reports() == 1);
  CHECK(diag.str() == "DEADLOCK: task 2 cycle L1 -> L0 -> L1\n");
}

TEST_CASE("re-acquiring a held lock is a one-lock cycle") {
  LockDetector d;
  auto& l = d.create_lock();
  LockChain a(7);
  REQUIRE(d.acquire(l, a).acquired());
  auto r = d.acquire(l, a);
  CHECK(r.status == AcquireStatus::would_deadlock);
  CHECK(r.cycle == std::vector<LockId>{l.id(), l.id()});
  CHECK(format_cycle_report(7, r.cycle) == "DEADLOCK: task 7 cycle L0 -> L0");
}

TEST_CASE("the same cycle is reported once however often it is hit") {
  LockDetector d;
  std::vector<std::string> seen;
  d.set_reporter([&](TaskId t, std::span<const LockId> c) { seen.push_back(format_cycle_report(t, c)); });
  auto& l1 = d.create_lock();
  auto& l2 = d.create_lock();
  LockChain a(1), b(2);
  REQUIRE(d.acquire(l1, a).acquired());
  REQUIRE(d.acquire(l2, b).acquired());
  (void)d.acquire(l2, a);
  for (int i = 0; i < 5; ++i) CHECK(d.acquire(l1, b).status == AcquireStatus::would_deadlock);
  // The other participant sees the same cycle in another rotation.
  CHECK(d.acquire(l2, a).status == AcquireStatus::would_deadlock);
  CHECK(d.reports() == 1);
  CHECK(seen.size() == 1);
}

TEST_CASE("release mode never runs detection") {
  LockDetector d(false);
  auto& l = d.create_lock();
  LockChain a(1);
  REQUIRE(d.acquire(l, a).acquired());
  CHECK(d.acquire(l, a).status == AcquireStatus::contended);
  CHECK(d.reports() == 0);
  CHECK(d.edge_count() == 0);
}

TEST_CASE("stale dependency edges are pruned instead of reported") {
  LockDetector d;
  auto& l1 = d.create_lock();
  auto& l2 = d.create_lock();
  LockChain a(1), b(2), c(3);
  REQUIRE(d.acquire(l1, a).acquired());
  REQUIRE(d.acquire(l2, b).acquired());
  CHECK(d.acquire(l2, a).status == AcquireStatus::contended);  // edge L0 -> L1
  d.cancel_wait(1);
  d.release(l1, a);
  REQUIRE(d.acquire(l1, c).acquired());
  const auto before = d.edge_count();
  // B now waits on L0 held by C, who waits on nothing: no deadlock.
  CHECK(d.acquire(l1, b).status == AcquireStatus::contended);
  CHECK(d.reports() == 0);
  CHECK(d.edge_count() < before + 1);
}

namespace {

// Independent oracle: follow holder -> waited-on lock -> holder links.
bool has_wait_cycle(const std::vector<int>& holder_of_lock, const std::vector<int>& waits_on) {
  const int n = static_cast<int>(waits_on.size());
  for (int start = 0; start < n; ++start) {
    int t = start;
    for (int step = 0; step <= n && t >= 0; ++step) {
      const int l = waits_on[t];
      if (l < 0) break;
      t = holder_of_lock[l];
      if (t == start) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("planted wait-for cycles are always detected") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int tasks = 2 + static_cast<int>(gen() % 6);
    const int extra = static_cast<int>(gen() % 4);
    LockDetector d;
    std::vector<AgileLock*> locks;
    for (int i = 0; i < tasks + extra; ++i) locks.push_back(&d.create_lock());
    std::vector<LockChain> chains;
    for (int t = 0; t < tasks; ++t) chains.emplace_back(t);
    std::vector<int> holder(locks.size(), -1);
    // Task t holds lock perm[t]; some also hold an extra lock.
    std::vector<int> perm(tasks);
    for (int i = 0; i < tasks; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), gen);
    for (int t = 0; t < tasks; ++t) {
      REQUIRE(d.acquire(*locks[perm[t]], chains[t]).acquired());
      holder[perm[t]] = t;
    }
    for (int e = 0; e < extra; ++e) {
      const int t = static_cast<int>(gen() % tasks);
      REQUIRE(d.acquire(*locks[tasks + e], chains[t]).acquired());
      holder[tasks + e] = t;
    }
    // A ring of length k over a random subset of tasks; the rest wait on
    // random held locks or nothing.
    const int k = 1 + static_cast<int>(gen() % tasks);
    std::vector<int> order(tasks);
    for (int i = 0; i < tasks; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<int> waits(tasks, -1);
    for (int i = 0; i < k; ++i) waits[order[i]] = perm[order[(i + 1) % k]];
    for (int i = k; i < tasks; ++i) {
      if (gen() % 2) waits[order[i]] = static_cast<int>(gen() % locks.size());
    }
    REQUIRE(has_wait_cycle(holder, waits));
    bool detected = false;
    for (int i = 0; i < tasks; ++i) {
      const int t = order[(i + k) % tasks];  // non-ring waiters first, ring last
      if (waits[t] < 0) continue;
      auto r = d.acquire(*locks[waits[t]], chains[t]);
      CHECK_FALSE(r.acquired());
      detected = detected || r.status == AcquireStatus::would_deadlock;
    }
    CHECK(detected);
    CHECK(d.reports() >= 1);
  }
}

TEST_CASE("acyclic waiting never reports") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int tasks = 2 + static_cast<int>(gen() % 6);
    LockDetector d;
    std::vector<AgileLock*> locks;
    for (int i = 0; i < tasks; ++i) locks.push_back(&d.create_lock());
    std::vector<LockChain> chains;
    for (int t = 0; t < tasks; ++t) {
      chains.emplace_back(t);
      REQUIRE(d.acquire(*locks[t], chains[t]).acquired());
    }
    // Task t may only wait on a lock held by a higher-numbered task.
    for (int t = 0; t + 1 < tasks; ++t) {
      const int target = t + 1 + static_cast<int>(gen() % (tasks - t - 1));
      CHECK(d.acquire(*locks[target], chains[t]).status == AcquireStatus::contended);
    }
    CHECK(d.reports() == 0);
  }
}

TEST_CASE("lock words stay mutually exclusive under real threads") {
  AgileLock l(0);
  long counter = 0;
  std::atomic<int> bad_releases{0};
  constexpr int kThreads = 8;
  constexpr int kIters = 20000;
  std::vector<std::thread> pool;
  for (int t = 0; t < kThreads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = 0; i < kIters; ++i) {
        while (!l.try_acquire(t)) std::this_thread::yield();
        ++counter;
        if (!l.release(t)) ++bad_releases;
      }
    });
  }
  for (auto& th : pool) th.join();
  CHECK(counter == long{kThreads} * kIters);
  CHECK(bad_releases == 0);
  CHECK(l.is_free());
}
