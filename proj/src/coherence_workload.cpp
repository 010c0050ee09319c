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
#include "agile/coherence.hpp"

#include <map>
#include <random>

namespace agile::coherence {

namespace {

constexpr std::uint32_t kBlockSize = 512;

void store_le(std::byte* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}

}  // namespace

std::vector<std::vector<Op>> generate_ops(const Params& p) {
  if (p.tasks == 0 || p.blocks == 0) throw ConfigError("coherence workload needs tasks and blocks");
  std::mt19937_64 gen(p.seed * 0x9E3779B97F4A7C15ull + 17);
  std::uniform_int_distribution<std::uint64_t> blk(0, p.blocks - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<sim::SimTime> think(0, 150'000);
  std::vector<std::vector<Op>> out(p.tasks);
  for (std::uint32_t t = 0; t < p.tasks; ++t) {
    for (std::uint32_t i = 0; i < p.ops_per_task; ++i) {
      Op op;
      op.kind = coin(gen) ? OpKind::write : OpKind::read;
      op.blk = blk(gen);
      op.value = (std::uint64_t{t + 1} << 32) | (i + 1);
      op.think_ns = think(gen);
      op.hold_ns = think(gen);
      out[t].push_back(op);
    }
  }
  return out;
}

Result run(const Params& p, bench::RunMonitor& mon) {
  const auto ops = generate_ops(p);

  RuntimeConfig rc;
  rc.seed = p.seed;
  rc.randomize_ties = true;
  DeviceConfig dc;
  dc.blocks = std::max<std::uint64_t>(p.blocks, 8);
  dc.block_size = kBlockSize;
  dc.jitter = Jitter::uniform;
  dc.jitter_ns = 40'000;
  rc.devices = {dc};
  rc.queues.num_queue_pairs = 1;
  rc.queues.queue_depth = p.queue_depth;
  rc.cache.lines = p.cache_lines;
  rc.share.enabled = p.share_table;
  rc.share.buckets = 8;
  rc.service.warps = 1;
  Runtime rt(rc);

  Result res;
  std::uint64_t seq = 0;
  auto commit = [&](std::uint32_t task, OpKind kind, std::uint64_t blk, std::uint64_t value) {
    res.commits.push_back(Commit{seq++, task, kind, blk, value});
    if (rt.sim().trace().enabled()) {
      rt.sim().trace().emit("coh", kind == OpKind::read ? "read" : "write",
                            {{"task", task}, {"blk", static_cast<std::int64_t>(blk)},
                             {"value", static_cast<std::int64_t>(value)}});
    }
  };

  for (std::uint32_t t = 0; t < p.tasks; ++t) {
    rt.launch("coh" + std::to_string(t), t, [&, t](api::ThreadCtx& ctx) -> sim::Co<void> {
      auto& ctrl = rt.ctrl();
      auto& sim = rt.sim();
      for (const Op& op : ops[t]) {
        co_await sim.sleep(op.think_ns);
        const BlockKey key{0, op.blk};
        api::AgileBuf buf = ctrl.make_buffer();
        if (op.kind == OpKind::read) {
          co_await ctrl.async_read(ctx, key, buf);
          co_await ctrl.wait(ctx, buf);
          commit(t, OpKind::read, op.blk, api::load_le(buf.data().data(), 8));
          co_await ctrl.release(ctx, buf);
        } else if (p.share_table) {
          co_await ctrl.async_read(ctx, key, buf);
          co_await ctrl.wait(ctx, buf);
          store_le(buf.data().data(), op.value);
          ctrl.mark_modified(ctx, buf);
          commit(t, OpKind::write, op.blk, op.value);
          co_await sim.sleep(op.hold_ns);
          co_await ctrl.release(ctx, buf);
        } else {
          // Private copy: the store is visible to this task now and to
          // everyone else once asyncWrite reaches the cache.
          store_le(buf.data().data(), op.value);
          commit(t, OpKind::write, op.blk, op.value);
          co_await sim.sleep(op.hold_ns);
          auto durable = co_await ctrl.async_write(ctx, key, buf);
          co_await durable->wait();
        }
      }
    });
  }
  const RunReport report = bench::monitored_run(rt, mon, true);
  res.unfinished_tasks = report.user_tasks_unfinished;

  std::map<std::uint64_t, std::uint64_t> state;
  for (const Commit& c : res.commits) {
    if (c.kind == OpKind::write) {
      ++res.writes;
      state[c.blk] = c.value;
      continue;
    }
    ++res.reads;
    const std::uint64_t expect = state.contains(c.blk) ? state[c.blk] : 0;
    if (c.value != expect) {
      ++res.stale_reads;
      res.notes.push_back("commit " + std::to_string(c.seq) + ": task " + std::to_string(c.task) + " read " +
                          std::to_string(c.value) + " from block " + std::to_string(c.blk) + ", expected " +
                          std::to_string(expect));
    }
  }
  for (std::uint64_t b = 0; b < p.blocks; ++b) {
    const std::uint64_t expect = state.contains(b) ? state[b] : 0;
    const auto dev = rt.device(0).read_block(b);
    bool ok = api::load_le(dev.data(), 8) == expect;
    if (auto line = rt.cache().lookup(BlockKey{0, b})) {
      const auto& l = rt.cache().line(*line);
      if (l.state == cache::LineState::ready || l.state == cache::LineState::modified) {
        ok = ok && api::load_le(l.data.data(), 8) == expect;
      }
    }
    if (!ok) {
      ++res.final_mismatches;
      res.notes.push_back("block " + std::to_string(b) + " final content differs from replay");
    }
  }
  return res;
}

}  // namespace agile::coherence
