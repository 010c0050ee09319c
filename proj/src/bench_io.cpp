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
#include <cstring>
#include <random>

#include "agile/bench.hpp"

namespace agile::bench {

namespace {

// Odd multiplier: a bijection on any power-of-two block range.
constexpr std::uint64_t kScatter = 0x9E3779B97F4A7C15ull;

std::uint64_t scatter_block(std::uint64_t k, std::uint64_t seed, std::uint64_t blocks) {
  const std::uint64_t x = k * kScatter + seed * 0xD1B54A32D192ED03ull;
  return nvme::is_power_of_two(blocks) ? (x & (blocks - 1)) : (x % blocks);
}

BlockKey spread(const RuntimeConfig& rc, std::uint64_t idx) {
  const auto ndev = static_cast<std::uint32_t>(rc.devices.size());
  const std::uint32_t dev = static_cast<std::uint32_t>(idx % ndev);
  return BlockKey{dev, (idx / ndev) % rc.devices[dev].blocks};
}

std::uint64_t device_reads(Runtime& rt) {
  std::uint64_t n = 0;
  for (std::uint32_t d = 0; d < rt.num_devices(); ++d) n += rt.device(d).stats().reads;
  return n;
}

}  // namespace

RwRow rand_rw_point(const ExperimentConfig& cfg, nvme::Opcode op, std::uint32_t devices, std::uint32_t inflight,
                    RunMonitor& mon) {
  if (devices == 0 || inflight == 0) throw ConfigError("devices and inflight must be positive");
  RuntimeConfig rc = cfg.runtime;
  rc.devices.resize(devices, rc.devices.front());
  Runtime rt(rc);
  const std::uint32_t per_thread = cfg.workload.requests_per_thread;
  sim::SimTime last = 0;
  for (std::uint32_t t = 0; t < inflight; ++t) {
    rt.launch("rw" + std::to_string(t), t, [&, t](api::ThreadCtx& ctx) -> sim::Co<void> {
      auto& ctrl = rt.ctrl();
      api::AgileBuf buf = ctrl.make_buffer();
      for (std::uint32_t j = 0; j < per_thread; ++j) {
        // Request i goes to device i mod d.
        const std::uint64_t i = std::uint64_t{j} * inflight + t;
        const std::uint32_t dev = static_cast<std::uint32_t>(i % devices);
        const BlockKey key{dev, scatter_block(i / devices, rc.seed, rc.devices[dev].blocks)};
        if (op == nvme::Opcode::read) {
          co_await ctrl.async_read(ctx, key, buf);
          co_await ctrl.wait(ctx, buf);
        } else {
          std::memcpy(buf.data().data(), &i, sizeof i);
          auto durable = co_await ctrl.async_write(ctx, key, buf);
          co_await durable->wait();
        }
      }
      last = std::max(last, rt.sim().now());
    });
  }
  monitored_run(rt, mon);
  RwRow r;
  r.inflight = inflight;
  r.devices = devices;
  r.elapsed_ns = last;
  r.bytes = std::uint64_t{inflight} * per_thread * rc.devices.front().block_size;
  r.gb_per_s = last == 0 ? 0.0 : static_cast<double>(r.bytes) / static_cast<double>(last);
  return r;
}

std::vector<RwRow> run_rand_rw(const ExperimentConfig& cfg, nvme::Opcode op, RunMonitor& mon) {
  std::vector<RwRow> rows;
  for (std::uint32_t d = 1; d <= cfg.workload.max_devices; ++d) {
    for (std::uint32_t n : cfg.workload.inflight_points) rows.push_back(rand_rw_point(cfg, op, d, n, mon));
  }
  return rows;
}

Csv rand_rw_csv(const std::vector<RwRow>& rows) {
  Csv c;
  c.header = {"concurrent_requests", "num_devices", "elapsed_ns", "bytes", "GB_per_s"};
  for (const auto& r : rows) {
    c.add({std::to_string(r.inflight), std::to_string(r.devices), std::to_string(r.elapsed_ns),
           std::to_string(r.bytes), fmt(r.gb_per_s, 4)});
  }
  return c;
}

GatherResult gather_run(const ExperimentConfig& cfg, bool async, RunMonitor& mon) {
  const WorkloadConfig& w = cfg.workload;
  if (w.gather_threads == 0 || w.table_blocks == 0) throw ConfigError("gather workload needs threads and blocks");
  Runtime rt(cfg.runtime);

  // Per-epoch gather lists, identical for both modes.
  std::vector<std::vector<std::uint64_t>> epochs(w.epochs);
  std::mt19937_64 gen(cfg.runtime.seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, w.table_blocks - 1);
  for (auto& e : epochs) {
    e.resize(w.gathers_per_epoch);
    for (auto& g : e) g = pick(gen);
  }

  sim::SimTime last = 0;
  for (std::uint32_t t = 0; t < w.gather_threads; ++t) {
    rt.launch("gather" + std::to_string(t), t, [&, t](api::ThreadCtx& ctx) -> sim::Co<void> {
      auto& ctrl = rt.ctrl();
      api::AgileBuf buf = ctrl.make_buffer();
      auto own = [&](std::uint32_t e) {
        std::vector<BlockKey> keys;
        for (std::size_t j = t; j < epochs[e].size(); j += w.gather_threads) {
          keys.push_back(spread(cfg.runtime, epochs[e][j]));
        }
        return keys;
      };
      auto read_epoch = [&](std::uint32_t e) -> sim::Co<void> {
        for (const BlockKey& k : own(e)) {
          co_await ctrl.async_read(ctx, k, buf);
          co_await ctrl.wait(ctx, buf);
        }
      };
      auto compute = [&](std::uint32_t e) { return rt.sim().sleep(w.compute_ns_per_gather * own(e).size()); };

      if (!async) {
        for (std::uint32_t e = 0; e < w.epochs; ++e) {
          co_await read_epoch(e);
          co_await compute(e);
        }
      } else if (w.epochs > 0) {
        co_await read_epoch(0);
        for (std::uint32_t e = 0; e < w.epochs; ++e) {
          if (e + 1 < w.epochs) {
            for (const BlockKey& k : own(e + 1)) co_await ctrl.prefetch(ctx, k);
          }
          co_await compute(e);
          if (e + 1 < w.epochs) co_await read_epoch(e + 1);
        }
      }
      last = std::max(last, rt.sim().now());
    });
  }
  monitored_run(rt, mon);
  return GatherResult{last, device_reads(rt)};
}

namespace {

std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::vector<std::uint64_t>& values,
                            void (*apply)(ExperimentConfig&, std::uint64_t), RunMonitor& mon) {
  std::vector<SweepRow> rows;
  for (std::uint64_t v : values) {
    ExperimentConfig cfg = base;
    apply(cfg, v);
    SweepRow r;
    r.value = v;
    r.sync = gather_run(cfg, false, mon);
    r.async = gather_run(cfg, true, mon);
    r.speedup = static_cast<double>(r.sync.elapsed_ns) / static_cast<double>(std::max<sim::SimTime>(1, r.async.elapsed_ns));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

std::vector<SweepRow> run_queue_sweep(const ExperimentConfig& cfg, RunMonitor& mon) {
  std::vector<std::uint64_t> values(cfg.workload.queue_pair_points.begin(), cfg.workload.queue_pair_points.end());
  return sweep(cfg, values, [](ExperimentConfig& c, std::uint64_t v) {
    c.runtime.queues.num_queue_pairs = static_cast<std::uint32_t>(v);
  }, mon);
}

std::vector<SweepRow> run_cache_sweep(const ExperimentConfig& cfg, RunMonitor& mon) {
  return sweep(cfg, cfg.workload.cache_line_points, [](ExperimentConfig& c, std::uint64_t v) {
    c.runtime.cache.lines = v;
  }, mon);
}

Csv sweep_csv(const char* param, const std::vector<SweepRow>& rows) {
  Csv c;
  c.header = {param, "t_sync_ns", "t_async_ns", "speedup", "reads_sync", "reads_async"};
  for (const auto& r : rows) {
    c.add({std::to_string(r.value), std::to_string(r.sync.elapsed_ns), std::to_string(r.async.elapsed_ns),
           fmt(r.speedup, 4), std::to_string(r.sync.device_reads), std::to_string(r.async.device_reads)});
  }
  return c;
}

}  // namespace agile::bench
