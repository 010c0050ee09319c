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
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "agile/audit.hpp"
#include "agile/host.hpp"
#include "doctest.h"

using namespace agile;
using api::ThreadCtx;

namespace {

RuntimeConfig api_cfg(std::uint64_t lines = 64, std::uint64_t blocks = 256) {
  RuntimeConfig cfg;
  cfg.devices[0].blocks = blocks;
  cfg.devices[0].block_size = 512;
  cfg.devices[0].base_latency_ns = 4'000;
  cfg.devices[0].write_latency_ns = 6'000;
  cfg.devices[0].parallelism = 8;
  cfg.queues.num_queue_pairs = 2;
  cfg.queues.queue_depth = 16;
  cfg.cache.lines = lines;
  cfg.service.warps = 1;
  return cfg;
}

std::uint64_t word(std::span<const std::byte> d, std::size_t at = 0) {
  std::uint64_t v;
  std::memcpy(&v, d.data() + at, sizeof v);
  return v;
}

void put(std::span<std::byte> d, std::uint64_t v, std::size_t at = 0) { std::memcpy(d.data() + at, &v, sizeof v); }

void seed_device(Runtime& rt, std::uint64_t blocks) {
  for (std::uint64_t b = 0; b < blocks; ++b) {
    std::vector<std::byte> v(rt.device(0).block_size());
    put(v, b + 1000);
    rt.device(0).write_block(b, v);
  }
}

// Brute force: leader of a lane is the lowest lane with the same key.
api::CoalesceResult coalesce_oracle(const std::vector<std::optional<BlockKey>>& lanes) {
  api::CoalesceResult r;
  r.group.assign(lanes.size(), -1);
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (!lanes[i]) continue;
    std::size_t lead = i;
    for (std::size_t j = 0; j < i; ++j) {
      if (lanes[j] == lanes[i]) {
        lead = j;
        break;
      }
    }
    if (lead == i) {
      r.unique.push_back(*lanes[i]);
      r.leaders.push_back(static_cast<std::uint32_t>(i));
    }
    for (std::size_t g = 0; g < r.leaders.size(); ++g) {
      if (r.leaders[g] == lead) r.group[i] = static_cast<int>(g);
    }
  }
  return r;
}

}  // namespace

TEST_CASE("warp coalescing examples") {
  std::vector<std::optional<BlockKey>> same(32, BlockKey{0, 5});
  auto r = api::warp_coalesce(same);
  CHECK(r.unique.size() == 1);
  CHECK(r.leaders == std::vector<std::uint32_t>{0});

  std::vector<std::optional<BlockKey>> distinct;
  for (std::uint64_t i = 0; i < 32; ++i) distinct.emplace_back(BlockKey{0, i});
  CHECK(api::warp_coalesce(distinct).unique.size() == 32);

  std::vector<std::optional<BlockKey>> mixed;
  for (int i = 0; i < 32; ++i) mixed.emplace_back(BlockKey{0, i % 2 == 0 ? 3u : 9u});
  r = api::warp_coalesce(mixed);
  CHECK(r.unique == std::vector<BlockKey>{{0, 3}, {0, 9}});
  CHECK(r.leaders == std::vector<std::uint32_t>{0, 1});
  auto o = coalesce_oracle(mixed);
  CHECK(r.group == o.group);

  std::vector<std::optional<BlockKey>> holes(32);
  holes[4] = BlockKey{1, 1};
  holes[9] = BlockKey{1, 1};
  r = api::warp_coalesce(holes);
  CHECK(r.leaders == std::vector<std::uint32_t>{4});
  CHECK(r.group[0] == -1);
  CHECK(r.group[9] == 0);
}

TEST_CASE("warp coalescing agrees with a brute-force oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::optional<BlockKey>> lanes(32);
    const auto span = 1 + rng() % 40;
    for (auto& l : lanes) {
      if (rng() % 5 != 0) l = BlockKey{static_cast<std::uint32_t>(rng() % 2), rng() % span};
    }
    auto got = api::warp_coalesce(lanes);
    auto want = coalesce_oracle(lanes);
    REQUIRE(got.unique == want.unique);
    REQUIRE(got.leaders == want.leaders);
    REQUIRE(got.group == want.group);
  }
}

TEST_CASE("warp-level prefetch forwards one request per distinct block") {
  SUBCASE("same block") {
    Runtime rt(api_cfg());
    api::UserWarp warp(rt.sim(), 0);
    for (std::uint32_t lane = 0; lane < 32; ++lane) {
      rt.launch("l", lane, [&, lane](ThreadCtx& ctx) -> sim::Co<void> {
        co_await rt.ctrl().prefetch(ctx, {0, 7}, &warp, lane);
      });
    }
    rt.run(1'000'000'000);
    CHECK(rt.ctrl().stats().prefetches == 32);
    CHECK(rt.ctrl().stats().prefetch_accesses == 1);
    CHECK(rt.device(0).stats().reads == 1);
  }
  SUBCASE("distinct blocks") {
    Runtime rt(api_cfg());
    api::UserWarp warp(rt.sim(), 0);
    for (std::uint32_t lane = 0; lane < 32; ++lane) {
      rt.launch("l", lane, [&, lane](ThreadCtx& ctx) -> sim::Co<void> {
        co_await rt.ctrl().prefetch(ctx, {0, lane}, &warp, lane);
      });
    }
    rt.run(1'000'000'000);
    CHECK(rt.ctrl().stats().prefetch_accesses == 32);
    CHECK(rt.cache().stats().accesses == 32);
  }
  SUBCASE("already cached") {
    Runtime rt(api_cfg());
    std::uint64_t reads_before = 0;
    rt.launch("l", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
      auto buf = rt.ctrl().make_buffer();
      co_await rt.ctrl().async_read(ctx, {0, 2}, buf);
      co_await rt.ctrl().wait(ctx, buf);
      reads_before = rt.device(0).stats().reads;
      co_await rt.ctrl().prefetch(ctx, {0, 2});
    });
    rt.run(1'000'000'000);
    CHECK(reads_before == 1);
    CHECK(rt.device(0).stats().reads == 1);
  }
}

TEST_CASE("prefetch returns before the fill completes") {
  Runtime rt(api_cfg());
  bool busy_after = false;
  rt.launch("l", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    co_await rt.ctrl().prefetch(ctx, {0, 11});
    auto line = rt.cache().lookup({0, 11});
    busy_after = line && rt.cache().line(*line).state == cache::LineState::busy;
    CHECK(ctx.chain.empty());
  });
  rt.run(1'000'000'000);
  CHECK(busy_after);
}

TEST_CASE("concurrent async reads of one block share one device read") {
  Runtime rt(api_cfg());
  seed_device(rt, 16);
  std::vector<std::uint64_t> got(32, 0);
  for (std::uint32_t t = 0; t < 32; ++t) {
    rt.launch("r", t, [&, t](ThreadCtx& ctx) -> sim::Co<void> {
      auto buf = rt.ctrl().make_buffer();
      co_await rt.ctrl().async_read(ctx, {0, 6}, buf);
      co_await rt.ctrl().wait(ctx, buf);
      got[t] = word(buf.data());
    });
  }
  rt.run(1'000'000'000);
  CHECK(rt.device(0).stats().reads == 1);
  for (auto v : got) CHECK(v == 1006);
  CHECK(rt.ctrl().stats().waits_holding_locks == 0);
}

TEST_CASE("a cached block is delivered without device traffic") {
  Runtime rt(api_cfg());
  seed_device(rt, 4);
  bool ready_on_return = false;
  rt.launch("r", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    auto a = rt.ctrl().make_buffer();
    co_await rt.ctrl().async_read(ctx, {0, 1}, a);
    co_await rt.ctrl().wait(ctx, a);
    auto b = rt.ctrl().make_buffer();
    co_await rt.ctrl().async_read(ctx, {0, 1}, b);
    ready_on_return = b.ready();
    CHECK(word(b.data()) == 1001);
  });
  rt.run(1'000'000'000);
  CHECK(ready_on_return);
  CHECK(rt.device(0).stats().reads == 1);
}

TEST_CASE("reusing a buffer with a pending read is rejected") {
  Runtime rt(api_cfg());
  int busy = 0;
  rt.launch("r", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    auto buf = rt.ctrl().make_buffer();
    co_await rt.ctrl().async_read(ctx, {0, 1}, buf);
    try {
      co_await rt.ctrl().async_read(ctx, {0, 2}, buf);
    } catch (const BufferBusy&) {
      ++busy;
    }
    try {
      co_await rt.ctrl().async_write(ctx, {0, 2}, buf);
    } catch (const BufferBusy&) {
      ++busy;
    }
    co_await rt.ctrl().wait(ctx, buf);
    co_await rt.ctrl().async_read(ctx, {0, 2}, buf);
    co_await rt.ctrl().wait(ctx, buf);
  });
  auto rep = rt.run(1'000'000'000);
  CHECK(busy == 2);
  CHECK(rep.user_tasks_unfinished == 0);
}

TEST_CASE("out-of-range keys are rejected") {
  Runtime rt(api_cfg(64, 16));
  int errors = 0;
  rt.launch("r", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    auto buf = rt.ctrl().make_buffer();
    for (BlockKey k : {BlockKey{0, 16}, BlockKey{1, 0}}) {
      try {
        co_await rt.ctrl().async_read(ctx, k, buf);
      } catch (const OutOfRange&) {
        ++errors;
      }
      try {
        co_await rt.ctrl().async_write(ctx, k, buf);
      } catch (const OutOfRange&) {
        ++errors;
      }
    }
    try {
      co_await rt.ctrl().array_get(ctx, 0, 16 * 512 / 8, 8);
    } catch (const OutOfRange&) {
      ++errors;
    }
    try {
      co_await rt.ctrl().array_get(ctx, 0, 0, 3);
    } catch (const ConfigError&) {
      ++errors;
    }
  });
  rt.run(1'000'000'000);
  CHECK(errors == 6);
}

TEST_CASE("async write is durable, reusable at once, and readable back") {
  Runtime rt(api_cfg(4, 64));
  std::vector<std::uint64_t> back;
  rt.launch("w", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    auto buf = rt.ctrl().make_buffer();
    std::vector<std::shared_ptr<service::TransactionBarrier>> durable;
    for (std::uint64_t b = 0; b < 10; ++b) {
      put(buf.data(), 0xA000 + b);
      durable.push_back(co_await rt.ctrl().async_write(ctx, {0, b}, buf));
    }
    for (auto& d : durable) co_await d->wait();
    auto rd = rt.ctrl().make_buffer();
    for (std::uint64_t b = 0; b < 10; ++b) {
      co_await rt.ctrl().async_read(ctx, {0, b}, rd);
      co_await rt.ctrl().wait(ctx, rd);
      back.push_back(word(rd.data()));
    }
  });
  auto rep = rt.run(1'000'000'000);
  CHECK(rep.user_tasks_unfinished == 0);
  for (std::uint64_t b = 0; b < 10; ++b) {
    CHECK(back[b] == 0xA000 + b);
    CHECK(word(rt.device(0).read_block(b)) == 0xA000 + b);
  }
}

TEST_CASE("writers on a depth-2 queue never deadlock") {
  auto cfg = api_cfg(16, 256);
  cfg.queues.num_queue_pairs = 1;
  cfg.queues.queue_depth = 2;
  cfg.lock_debug = true;
  Runtime rt(cfg);
  audit::ProtocolAuditor aud;
  aud.attach(rt.sim());
  for (std::uint32_t t = 0; t < 40; ++t) {
    rt.launch("w", t, [&, t](ThreadCtx& ctx) -> sim::Co<void> {
      auto buf = rt.ctrl().make_buffer();
      put(buf.data(), 0xB000 + t);
      auto d = co_await rt.ctrl().async_write(ctx, {0, t}, buf);
      co_await d->wait();
    });
  }
  auto rep = rt.run(10'000'000'000);
  CHECK(rep.user_tasks_unfinished == 0);
  CHECK(rep.sim.stop_reason == sim::StopReason::quiescent);
  CHECK(rt.deadlock_reports().empty());
  CHECK(aud.violations() == 0);
  for (std::uint64_t t = 0; t < 40; ++t) CHECK(word(rt.device(0).read_block(t)) == 0xB000 + t);
}

TEST_CASE("array view reads little-endian elements") {
  Runtime rt(api_cfg());
  std::vector<std::byte> blk(512);
  for (std::size_t i = 0; i < blk.size(); ++i) blk[i] = static_cast<std::byte>(i & 0xff);
  rt.device(0).write_block(1, blk);
  std::vector<std::uint64_t> got;
  rt.launch("a", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    got.push_back(co_await rt.ctrl().array_get(ctx, 0, 0, 4));
    got.push_back(co_await rt.ctrl().array_get(ctx, 0, 128, 4));
    got.push_back(co_await rt.ctrl().array_get(ctx, 0, 129, 4));
    got.push_back(co_await rt.ctrl().array_get(ctx, 0, 512 + 3, 1));
  });
  rt.run(1'000'000'000);
  REQUIRE(got.size() == 4);
  CHECK(got[0] == 0);
  CHECK(got[1] == 0x03020100u);
  CHECK(got[2] == 0x07060504u);
  CHECK(got[3] == 3);
  CHECK(rt.device(0).stats().reads == 2);
}

TEST_CASE("warp array access reads each block once") {
  Runtime rt(api_cfg());
  std::vector<std::byte> blk(512);
  for (std::uint32_t i = 0; i < 128; ++i) std::memcpy(blk.data() + 4 * i, &i, 4);
  rt.device(0).write_block(0, blk);
  api::UserWarp warp(rt.sim(), 0);
  std::vector<std::uint64_t> got(32);
  for (std::uint32_t lane = 0; lane < 32; ++lane) {
    rt.launch("l", lane, [&, lane](ThreadCtx& ctx) -> sim::Co<void> {
      got[lane] = co_await rt.ctrl().warp_array_get(ctx, warp, lane, 0, lane * 3, 4);
    });
  }
  rt.run(1'000'000'000);
  for (std::uint32_t lane = 0; lane < 32; ++lane) CHECK(got[lane] == lane * 3);
  CHECK(rt.device(0).stats().reads == 1);
  CHECK(rt.cache().stats().accesses == 1);
}

TEST_CASE("shared buffers merge updates from different writers") {
  auto cfg = api_cfg();
  cfg.share.enabled = true;
  cfg.share.buckets = 16;
  Runtime rt(cfg);
  seed_device(rt, 4);
  sim::Barrier both(rt.sim(), 2);
  bool second_shared = false;
  for (std::uint32_t t = 0; t < 2; ++t) {
    rt.launch("s", t, [&, t](ThreadCtx& ctx) -> sim::Co<void> {
      auto buf = rt.ctrl().make_buffer();
      co_await rt.sim().sleep(t * 1'000);
      co_await rt.ctrl().async_read(ctx, {0, 2}, buf);
      co_await rt.ctrl().wait(ctx, buf);
      if (t == 1) second_shared = buf.shared();
      co_await both.arrive_and_wait();
      put(buf.data(), 0xC0DE0000 + t, 64 + 8 * t);
      rt.ctrl().mark_modified(ctx, buf);
      co_await both.arrive_and_wait();
      co_await rt.sim().sleep(t * 5'000);
      co_await rt.ctrl().release(ctx, buf);
    });
  }
  auto rep = rt.run(1'000'000'000, true);
  CHECK(rep.user_tasks_unfinished == 0);
  CHECK(second_shared);
  auto d = rt.device(0).read_block(2);
  CHECK(word(d) == 1002);
  CHECK(word(d, 64) == 0xC0DE0000);
  CHECK(word(d, 72) == 0xC0DE0001);
  CHECK(rt.share_table()->size() == 0);
  CHECK(rt.share_table()->stats().transfers == 1);
}

TEST_CASE("last release of a modified shared buffer leaves a modified cache line") {
  auto cfg = api_cfg();
  cfg.share.enabled = true;
  cfg.share.buckets = 16;
  Runtime rt(cfg);
  seed_device(rt, 4);
  std::optional<cache::LineState> state;
  std::uint64_t cached = 0;
  rt.launch("s", 0, [&](ThreadCtx& ctx) -> sim::Co<void> {
    auto buf = rt.ctrl().make_buffer();
    co_await rt.ctrl().async_read(ctx, {0, 3}, buf);
    co_await rt.ctrl().wait(ctx, buf);
    put(buf.data(), 0xFEED);
    rt.ctrl().mark_modified(ctx, buf);
    co_await rt.ctrl().release(ctx, buf);
    auto line = rt.cache().lookup({0, 3});
    if (line) {
      state = rt.cache().line(*line).state;
      cached = word(rt.cache().line(*line).data);
    }
  });
  rt.run(1'000'000'000);
  CHECK(state == cache::LineState::modified);
  CHECK(cached == 0xFEED);
  CHECK(word(rt.device(0).read_block(3)) == 1003);
}

TEST_CASE("waiting tasks never hold locks") {
  auto cfg = api_cfg(8, 64);
  cfg.share.enabled = true;
  cfg.seed = 21;
  cfg.randomize_ties = true;
  Runtime rt(cfg);
  audit::ProtocolAuditor aud;
  aud.attach(rt.sim());
  for (std::uint32_t t = 0; t < 16; ++t) {
    rt.launch("m", t, [&, t](ThreadCtx& ctx) -> sim::Co<void> {
      std::mt19937_64 rng(t);
      auto buf = rt.ctrl().make_buffer();
      for (int i = 0; i < 20; ++i) {
        const BlockKey k{0, rng() % 20};
        co_await rt.ctrl().async_read(ctx, k, buf);
        co_await rt.ctrl().wait(ctx, buf);
        co_await rt.ctrl().release(ctx, buf);
        if (rng() % 4 == 0) co_await rt.ctrl().array_get(ctx, 0, rng() % 1000, 8);
      }
    });
  }
  auto rep = rt.run(10'000'000'000, true);
  CHECK(rep.user_tasks_unfinished == 0);
  CHECK(rt.ctrl().stats().waits > 0);
  CHECK(rt.ctrl().stats().waits_holding_locks == 0);
  CHECK(aud.counts().waits_holding_locks == 0);
  CHECK(rep.exits_holding_locks == 0);
  CHECK(aud.violations() == 0);
}
