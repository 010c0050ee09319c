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
#include <cstdint>
#include <deque>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "agile/nvme_queue.hpp"
#include "doctest.h"

using namespace agile;
using namespace agile::nvme;

namespace {

NvmeCommand read_cmd(std::uint64_t blk) {
  NvmeCommand c;
  c.opcode = Opcode::read;
  c.blk = blk;
  return c;
}

}  // namespace

TEST_CASE("depth must be a power of two in range") {
  lock::LockDetector det(false);
  CHECK_THROWS_AS(SubmissionQueue(0, 3, det), ConfigError);
  CHECK_THROWS_AS(SubmissionQueue(0, 1, det), ConfigError);
  CHECK_THROWS_AS(SubmissionQueue(0, 0, det), ConfigError);
  CHECK_THROWS_AS(SubmissionQueue(0, 131072, det), ConfigError);
  CHECK_NOTHROW(SubmissionQueue(0, 2, det));
  CHECK_NOTHROW(SubmissionQueue(0, 65536, det));
  CHECK_THROWS_AS(CompletionQueue(0, 48), ConfigError);
  CHECK_THROWS_AS(CompletionQueue(0, 16), ConfigError);
  CHECK_NOTHROW(CompletionQueue(0, 64));
}

TEST_CASE("cq depth covers two polling windows") {
  CHECK(cq_depth_for(2) == 64);
  CHECK(cq_depth_for(64) == 64);
  CHECK(cq_depth_for(256) == 256);
}

TEST_CASE("one slot stays free so a full ring is distinguishable") {
  lock::LockDetector det(false);
  SubmissionQueue sq(0, 2, det);
  CHECK(sq.capacity() == 1);
  auto p = sq.try_reserve();
  REQUIRE(p.has_value());
  CHECK(*p == 0);
  CHECK(sq.full());
  CHECK_FALSE(sq.try_reserve().has_value());

  SubmissionQueue big(1, 256, det);
  for (int i = 0; i < 255; ++i) REQUIRE(big.try_reserve().has_value());
  CHECK(big.full());
  CHECK_FALSE(big.try_reserve().has_value());
}

TEST_CASE("cid equals the slot index") {
  lock::LockDetector det(false);
  SubmissionQueue sq(0, 4, det);
  for (int lap = 0; lap < 3; ++lap) {
    for (int i = 0; i < 3; ++i) {
      auto p = sq.try_reserve();
      REQUIRE(p);
      sq.write_entry(*p, read_cmd(*p));
    }
    std::vector<std::uint32_t> slots;
    sq.scan_and_publish([&](std::uint32_t s) { slots.push_back(s); });
    REQUIRE(slots.size() == 3);
    for (auto s : slots) {
      CHECK(sq.command(s).cid == s);
      sq.release(s);
    }
  }
  CHECK(sq.head() == 9);
  CHECK(sq.tail() == 9);
}

TEST_CASE("scan flips only the contiguous updated run") {
  lock::LockDetector det(false);
  SUBCASE("U U E") {
    SubmissionQueue sq(0, 4, det);
    for (int i = 0; i < 3; ++i) REQUIRE(sq.try_reserve());
    sq.write_entry(0, read_cmd(0));
    sq.write_entry(1, read_cmd(1));
    auto r = sq.scan_and_publish();
    CHECK(r.old_doorbell == 0);
    CHECK(r.new_doorbell == 2);
    CHECK(r.issued() == 2);
    CHECK(sq.state(0) == SqeState::issued);
    CHECK(sq.state(1) == SqeState::issued);
    CHECK(sq.state(2) == SqeState::empty);
  }
  SUBCASE("U E U") {
    SubmissionQueue sq(0, 4, det);
    for (int i = 0; i < 3; ++i) REQUIRE(sq.try_reserve());
    sq.write_entry(0, read_cmd(0));
    sq.write_entry(2, read_cmd(2));
    auto r = sq.scan_and_publish();
    CHECK(r.new_doorbell == 1);
    CHECK(sq.state(2) == SqeState::updated);
    sq.write_entry(1, read_cmd(1));
    r = sq.scan_and_publish();
    CHECK(r.old_doorbell == 1);
    CHECK(r.new_doorbell == 3);
  }
}

TEST_CASE("release advances head over the empty prefix only") {
  lock::LockDetector det(false);
  SubmissionQueue sq(0, 8, det);
  for (std::uint64_t i = 0; i < 4; ++i) {
    sq.try_reserve();
    sq.write_entry(i, read_cmd(i));
  }
  sq.scan_and_publish();
  sq.release(2);
  CHECK(sq.head() == 0);
  sq.release(1);
  CHECK(sq.head() == 0);
  sq.release(0);
  CHECK(sq.head() == 3);
  sq.release(3);
  CHECK(sq.head() == 4);
}

TEST_CASE("protocol misuse is rejected") {
  lock::LockDetector det(false);
  SubmissionQueue sq(0, 4, det);
  sq.try_reserve();
  sq.write_entry(0, read_cmd(0));
  CHECK_THROWS_AS(sq.write_entry(0, read_cmd(0)), ProtocolViolation);
  CHECK_THROWS_AS(sq.release(0), ProtocolViolation);
  sq.scan_and_publish();
  sq.release(0);
  CHECK_THROWS_AS(sq.release(0), ProtocolViolation);
}

TEST_CASE("completion phase flips every lap") {
  CHECK(phase_for(0, 64) == 1);
  CHECK(phase_for(63, 64) == 1);
  CHECK(phase_for(64, 64) == 0);
  CHECK(phase_for(127, 64) == 0);
  CHECK(phase_for(128, 64) == 1);

  CompletionQueue cq(0, 64);
  CHECK_FALSE(cq.is_new(0));
  for (std::uint16_t i = 0; i < 63; ++i) {
    CHECK(cq.post(i, 0, 0) == i);
    CHECK(cq.is_new(i));
  }
  CHECK(cq.device_full());
  cq.device_head_doorbell(32);
  CHECK(cq.device_head() == 32);
  CHECK_FALSE(cq.device_full());
  auto p = cq.post(63, 0, 0);
  CHECK(cq.is_new(p));
  p = cq.post(0, 0, 0);
  CHECK(p == 64);
  CHECK(cq.entry(p).phase.load() == 0);
  CHECK(cq.is_new(p));
  CHECK_FALSE(cq.is_new(65));

  CompletionQueue small(1, 64);
  small.post(0, 1, 0);
  small.post(1, 1, 0);
  CHECK_THROWS_AS(small.device_head_doorbell(5), ProtocolViolation);
  CHECK_NOTHROW(small.device_head_doorbell(2));
}

TEST_CASE("sq selection rotates") {
  CHECK(select_sq(0, 4) == 0);
  CHECK(select_sq(5, 4) == 1);
  CHECK(select_sq(7, 1) == 0);
  CHECK(next_sq(3, 4) == 0);
  CHECK(next_sq(1, 4) == 2);
}

// Random operation sequences against a plain model of the ring.
TEST_CASE("ring matches a reference model under random operations") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t depth = 2u << (rng() % 6);
    lock::LockDetector det(false);
    SubmissionQueue sq(0, depth, det);
    std::deque<SqeState> model;  // states of [head, tail)
    std::uint64_t head = 0, door = 0;
    for (int step = 0; step < 400; ++step) {
      switch (rng() % 4) {
        case 0: {
          auto p = sq.try_reserve();
          if (model.size() >= depth - 1) {
            CHECK_FALSE(p.has_value());
          } else {
            REQUIRE(p.has_value());
            CHECK(*p == head + model.size());
            model.push_back(SqeState::empty);
          }
          break;
        }
        case 1: {
          std::vector<std::size_t> cand;
          for (std::size_t i = 0; i < model.size(); ++i) {
            if (head + i >= door && model[i] == SqeState::empty) cand.push_back(i);
          }
          if (cand.empty()) break;
          const auto i = cand[rng() % cand.size()];
          sq.write_entry(head + i, read_cmd(head + i));
          model[i] = SqeState::updated;
          break;
        }
        case 2: {
          std::uint64_t expect = door;
          while (expect < head + model.size() && model[expect - head] == SqeState::updated) {
            model[expect - head] = SqeState::issued;
            ++expect;
          }
          auto r = sq.scan_and_publish();
          CHECK(r.old_doorbell == door);
          CHECK(r.new_doorbell == expect);
          door = expect;
          break;
        }
        case 3: {
          std::vector<std::size_t> cand;
          for (std::size_t i = 0; i < model.size(); ++i) {
            if (model[i] == SqeState::issued) cand.push_back(i);
          }
          if (cand.empty()) break;
          const auto i = cand[rng() % cand.size()];
          sq.release(sq.slot_of(head + i));
          model[i] = SqeState::empty;
          while (!model.empty() && head < door && model.front() == SqeState::empty) {
            model.pop_front();
            ++head;
          }
          break;
        }
      }
      REQUIRE(sq.head() == head);
      REQUIRE(sq.tail() == head + model.size());
      REQUIRE(sq.doorbell() == door);
      REQUIRE(sq.in_use() <= sq.capacity());
      for (std::size_t i = 0; i < model.size(); ++i) {
        REQUIRE(sq.state(sq.slot_of(head + i)) == model[i]);
      }
    }
  }
}

TEST_CASE("concurrent producers never lose or duplicate an entry") {
  lock::LockDetector det(false);
  SubmissionQueue sq(0, 64, det);
  constexpr int kThreads = 8;
  constexpr int kPerThread = 4000;
  std::mutex door_mu;
  std::mutex issued_mu;
  std::deque<std::uint32_t> issued;
  std::atomic<int> violations{0};
  std::atomic<std::uint64_t> released{0};
  std::atomic<bool> stop{false};
  std::vector<std::uint64_t> seen(64, 0);

  std::thread consumer([&] {
    while (!stop.load() || released.load() < std::uint64_t{kThreads} * kPerThread) {
      std::uint32_t slot;
      {
        std::lock_guard g(issued_mu);
        if (issued.empty()) {
          if (stop.load() && released.load() >= std::uint64_t{kThreads} * kPerThread) break;
          continue;
        }
        slot = issued.front();
        issued.pop_front();
      }
      if (sq.command(slot).cid != slot) ++violations;
      ++seen[slot];
      try {
        sq.release(slot);
      } catch (const ProtocolViolation&) {
        ++violations;
      }
      ++released;
    }
  });

  std::vector<std::thread> producers;
  for (int t = 0; t < kThreads; ++t) {
    producers.emplace_back([&, t] {
      for (int i = 0; i < kPerThread; ++i) {
        std::optional<std::uint64_t> p;
        while (!(p = sq.try_reserve())) std::this_thread::yield();
        try {
          sq.write_entry(*p, read_cmd(static_cast<std::uint64_t>(t) << 32 | static_cast<std::uint64_t>(i)));
        } catch (const ProtocolViolation&) {
          ++violations;
        }
        while (sq.doorbell() <= *p) {
          std::lock_guard g(door_mu);
          sq.scan_and_publish([&](std::uint32_t s) {
            std::lock_guard g2(issued_mu);
            issued.push_back(s);
          });
        }
      }
    });
  }
  for (auto& th : producers) th.join();
  stop = true;
  consumer.join();

  CHECK(violations.load() == 0);
  CHECK(released.load() == std::uint64_t{kThreads} * kPerThread);
  CHECK(sq.tail() == std::uint64_t{kThreads} * kPerThread);
  CHECK(sq.head() == sq.tail());
  CHECK(sq.doorbell() == sq.tail());
  std::uint64_t total = 0;
  for (auto v : seen) total += v;
  CHECK(total == std::uint64_t{kThreads} * kPerThread);
}
