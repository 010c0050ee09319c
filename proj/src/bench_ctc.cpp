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
#include <array>
#include <cmath>

#include "agile/bench.hpp"

namespace agile::bench {

double ideal_speedup(double ctc) {
  if (ctc < 0) throw ConfigError("ctc must be non-negative");
  return ctc <= 1.0 ? 1.0 + ctc : 1.0 + 1.0 / ctc;
}

namespace {

BlockKey ctc_key(const RuntimeConfig& rc, std::uint32_t threads, std::uint32_t iter, std::uint32_t thread) {
  const std::uint64_t idx = std::uint64_t{iter} * threads + thread;
  const auto ndev = static_cast<std::uint32_t>(rc.devices.size());
  const std::uint32_t dev = static_cast<std::uint32_t>(idx % ndev);
  return BlockKey{dev, (idx / ndev) % rc.devices[dev].blocks};
}

}  // namespace

sim::SimTime ctc_run(const ExperimentConfig& cfg, bool async, sim::SimTime compute_ns, RunMonitor& mon) {
  Runtime rt(cfg.runtime);
  const std::uint32_t threads = cfg.workload.threads;
  const std::uint32_t iters = cfg.workload.iterations;
  sim::SimTime last = 0;
  // The block-wide barrier separating data arrival from compute.
  sim::Barrier block(rt.sim(), threads);
  for (std::uint32_t t = 0; t < threads; ++t) {
    rt.launch("ctc" + std::to_string(t), t, [&, t](api::ThreadCtx& ctx) -> sim::Co<void> {
      auto& ctrl = rt.ctrl();
      auto& sim = rt.sim();
      if (!async) {
        api::AgileBuf buf = ctrl.make_buffer();
        for (std::uint32_t i = 0; i < iters; ++i) {
          co_await ctrl.async_read(ctx, ctc_key(cfg.runtime, threads, i, t), buf);
          co_await ctrl.wait(ctx, buf);
          co_await block.arrive_and_wait();
          if (compute_ns > 0) co_await sim.sleep(compute_ns);
        }
      } else {
        std::array<api::AgileBuf, 2> bufs{ctrl.make_buffer(), ctrl.make_buffer()};
        if (iters > 0) co_await ctrl.async_read(ctx, ctc_key(cfg.runtime, threads, 0, t), bufs[0]);
        for (std::uint32_t i = 0; i < iters; ++i) {
          co_await ctrl.wait(ctx, bufs[i % 2]);
          co_await block.arrive_and_wait();
          if (i + 1 < iters) co_await ctrl.async_read(ctx, ctc_key(cfg.runtime, threads, i + 1, t), bufs[(i + 1) % 2]);
          if (compute_ns > 0) co_await sim.sleep(compute_ns);
        }
      }
      last = std::max(last, sim.now());
    });
  }
  monitored_run(rt, mon);
  return last;
}

std::vector<CtcRow> run_ctc_sweep(const ExperimentConfig& cfg, RunMonitor& mon) {
  if (cfg.workload.iterations == 0) throw ConfigError("iterations must be positive");
  // Communication time at zero overlap: the synchronous run with no compute.
  const sim::SimTime t_comm = ctc_run(cfg, false, 0, mon);
  std::vector<CtcRow> rows;
  for (double ctc : cfg.workload.ctc_points) {
    CtcRow r;
    r.ctc = ctc;
    r.ideal = ideal_speedup(ctc);
    const auto compute =
        static_cast<sim::SimTime>(std::llround(ctc * static_cast<double>(t_comm) / cfg.workload.iterations));
    r.t_sync = compute == 0 ? t_comm : ctc_run(cfg, false, compute, mon);
    r.t_async = ctc_run(cfg, true, compute, mon);
    r.speedup = static_cast<double>(r.t_sync) / static_cast<double>(r.t_async);
    rows.push_back(r);
  }
  return rows;
}

Csv ctc_csv(const std::vector<CtcRow>& rows) {
  Csv c;
  c.header = {"ctc", "t_sync_ns", "t_async_ns", "speedup", "ideal"};
  for (const auto& r : rows) {
    c.add({fmt(r.ctc, 2), std::to_string(r.t_sync), std::to_string(r.t_async), fmt(r.speedup, 4), fmt(r.ideal, 4)});
  }
  return c;
}

}  // namespace agile::bench
