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
#include <memory>

#include "agile/bench.hpp"

namespace agile::bench {

namespace {

constexpr sim::SimTime kMaxBackoffNs = 1024;

sim::SchedulerOptions options_for(const RuntimeConfig& rc) {
  sim::SchedulerOptions o;
  o.seed = rc.seed;
  o.randomize_ties = rc.randomize_ties;
  o.livelock_budget = rc.livelock_budget;
  return o;
}

// Everything one naive run needs, kept alive for the whole simulation.
struct NaiveWorld {
  NaiveWorld(const ExperimentConfig& cfg, std::uint32_t depth)
      : sim(options_for(cfg.runtime)),
        detector(true),
        dev(sim, 0, cfg.runtime.devices.front()),
        qp(0, 0, depth, nvme::cq_depth_for(depth), detector),
        timing(cfg.runtime.timing) {
    dev.bind(qp);
    for (std::uint32_t s = 0; s < depth; ++s) sqe_locks.push_back(&detector.create_lock("sqe" + std::to_string(s)));
  }

  sim::Simulator sim;
  lock::LockDetector detector;
  ssd::SsdDevice dev;
  nvme::QueuePair qp;
  TimingConfig timing;
  std::vector<lock::AgileLock*> sqe_locks;
  std::vector<std::string> reports;
  std::uint32_t finished = 0;
  std::uint32_t consumed = 0;
};

// An issuer that keeps its SQE locked until it has seen the completion
// itself, and only starts polling once all of its commands are out.
sim::Co<void> naive_issuer(NaiveWorld& w, std::uint32_t k, std::uint32_t commands) {
  auto& sim = w.sim;
  auto& sq = w.qp.sq;
  auto& cq = w.qp.cq;
  lock::LockChain chain(sim.current_task());
  const std::uint32_t bs = w.dev.config().block_size;
  std::vector<std::vector<std::byte>> bufs(commands, std::vector<std::byte>(bs));
  std::vector<std::uint16_t> mine;

  for (std::uint32_t c = 0; c < commands; ++c) {
    sim::SimTime backoff = w.timing.retry_ns;
    bool waited = false;
    std::uint64_t pos = 0;
    for (;;) {
      if (auto p = sq.try_reserve()) {
        pos = *p;
        break;
      }
      // Full: wait for whoever owns the oldest entry to give it back.
      auto& head_lock = *w.sqe_locks[sq.slot_of(sq.head())];
      if (w.detector.acquire(head_lock, chain).acquired()) w.detector.release(head_lock, chain);
      waited = true;
      co_await sim.sleep(backoff);
      backoff = std::min(backoff * 2, kMaxBackoffNs);
    }
    if (waited) w.detector.cancel_wait(chain.task());
    const std::uint32_t slot = sq.slot_of(pos);
    if (!w.detector.acquire(*w.sqe_locks[slot], chain).acquired()) {
      throw ProtocolViolation("naive issuer found its fresh SQE locked");
    }
    nvme::NvmeCommand cmd;
    cmd.opcode = nvme::Opcode::read;
    cmd.dev = 0;
    cmd.blk = std::uint64_t{k} * commands + c;
    cmd.dest = bufs[c].data();
    cmd.len = bs;
    co_await sim.sleep(w.timing.sqe_write_ns);
    sq.write_entry(pos, cmd);
    mine.push_back(static_cast<std::uint16_t>(slot));
    if (sim.trace().enabled()) {
      sim.trace().emit("naive", "enqueue", {{"sq", 0}, {"sqe", slot}, {"pos", static_cast<std::int64_t>(pos)}});
    }
    while (sq.doorbell() <= pos) {
      if (w.detector.acquire(sq.doorbell_lock(), chain).acquired()) {
        auto scan = sq.scan_and_publish([](std::uint32_t) {});
        if (scan.issued() > 0) {
          co_await sim.sleep(w.timing.doorbell_ns);
          w.dev.on_sq_doorbell(w.qp, static_cast<std::uint32_t>(scan.new_doorbell & (sq.depth() - 1)));
        }
        w.detector.release(sq.doorbell_lock(), chain);
      } else {
        co_await sim.sleep(w.timing.retry_ns);
      }
    }
    w.detector.cancel_wait(chain.task());
  }

  sim::SimTime backoff = w.timing.retry_ns;
  while (!mine.empty()) {
    const std::uint64_t pos = cq.host_head;
    if (cq.is_new(pos)) {
      const std::uint16_t cid = cq.entry(pos).cid;
      auto it = std::find(mine.begin(), mine.end(), cid);
      if (it != mine.end()) {
        mine.erase(it);
        cq.host_head = pos + 1;
        w.dev.on_cq_doorbell(w.qp, static_cast<std::uint32_t>(cq.host_head & (cq.depth() - 1)));
        sq.release(cid);
        w.detector.release(*w.sqe_locks[cid], chain);
        ++w.consumed;
        sim.note_progress();
        if (sim.trace().enabled()) sim.trace().emit("naive", "consume", {{"cid", cid}});
        backoff = w.timing.retry_ns;
        continue;
      }
    }
    co_await sim.sleep(backoff);
    backoff = std::min(backoff * 2, kMaxBackoffNs);
  }
  ++w.finished;
}

}  // namespace

DeadlockOutcome run_naive_issuers(const ExperimentConfig& cfg, std::uint32_t depth, RunMonitor& mon) {
  const WorkloadConfig& wl = cfg.workload;
  NaiveWorld w(cfg, depth);
  w.detector.set_reporter([&w](sim::TaskId t, std::span<const lock::LockId> cycle) {
    w.reports.push_back(lock::format_cycle_report(t, cycle));
    if (w.sim.trace().enabled()) w.sim.trace().emit("lock", "deadlock", {{"task", t}}, w.reports.back());
  });
  mon.begin_raw(w.sim);
  for (std::uint32_t k = 0; k < wl.demo_tasks; ++k) {
    w.sim.spawn(sim::TaskKind::user_thread, "naive" + std::to_string(k),
                naive_issuer(w, k, wl.demo_commands_per_task));
  }
  const sim::SimStats st = w.sim.run_until_quiescent(wl.demo_limit_ns);
  mon.end_raw(w.sim);

  DeadlockOutcome o;
  o.mode = "naive";
  o.tasks = wl.demo_tasks;
  o.tasks_blocked = wl.demo_tasks - w.finished;
  o.completed = o.tasks_blocked == 0;
  o.cycles_reported = w.detector.reports();
  o.reports = w.reports;
  o.barriers_total = wl.demo_tasks * wl.demo_commands_per_task;
  o.barriers_done = w.consumed;
  o.end_ns = st.final_clock;
  o.stop = st.stop_reason;
  w.sim.destroy_tasks();
  return o;
}

DeadlockOutcome run_agile_issuers(const ExperimentConfig& cfg, std::uint32_t depth, RunMonitor& mon) {
  const WorkloadConfig& wl = cfg.workload;
  RuntimeConfig rc = cfg.runtime;
  rc.devices.resize(1);
  rc.queues.num_queue_pairs = 1;
  rc.queues.queue_depth = depth;
  Runtime rt(rc);
  std::uint32_t done = 0;
  for (std::uint32_t k = 0; k < wl.demo_tasks; ++k) {
    rt.launch("agile" + std::to_string(k), k, [&, k](api::ThreadCtx& ctx) -> sim::Co<void> {
      auto& ctrl = rt.ctrl();
      std::vector<api::AgileBuf> bufs;
      for (std::uint32_t c = 0; c < wl.demo_commands_per_task; ++c) bufs.push_back(ctrl.make_buffer());
      for (std::uint32_t c = 0; c < wl.demo_commands_per_task; ++c) {
        co_await ctrl.async_read(ctx, BlockKey{0, std::uint64_t{k} * wl.demo_commands_per_task + c}, bufs[c]);
      }
      for (auto& b : bufs) {
        co_await ctrl.wait(ctx, b);
        if (b.ready()) ++done;
      }
    });
  }
  const RunReport r = monitored_run(rt, mon, false, wl.demo_limit_ns);
  DeadlockOutcome o;
  o.mode = "agile";
  o.tasks = wl.demo_tasks;
  o.tasks_blocked = r.user_tasks_unfinished;
  o.completed = r.user_tasks_unfinished == 0;
  o.cycles_reported = rt.detector().reports();
  o.reports = rt.deadlock_reports();
  o.barriers_total = wl.demo_tasks * wl.demo_commands_per_task;
  o.barriers_done = done;
  o.end_ns = r.sim.final_clock;
  o.stop = r.sim.stop_reason;
  return o;
}

DeadlockReport run_deadlock_demo(const ExperimentConfig& cfg, RunMonitor& mon) {
  const std::string& mode = cfg.workload.mode;
  if (mode != "naive" && mode != "agile" && mode != "both") throw ConfigError("mode must be naive, agile or both");
  DeadlockReport r;
  if (mode != "agile") r.naive = run_naive_issuers(cfg, cfg.workload.demo_depth, mon);
  if (mode != "naive") r.agile = run_agile_issuers(cfg, cfg.workload.demo_depth, mon);
  return r;
}

Csv deadlock_csv(const DeadlockReport& r) {
  Csv c;
  c.header = {"mode", "completed", "tasks", "tasks_blocked", "cycles_reported", "barriers_done", "barriers_total",
              "end_ns", "stop_reason", "first_report"};
  for (const auto* o : {r.naive ? &*r.naive : nullptr, r.agile ? &*r.agile : nullptr}) {
    if (o == nullptr) continue;
    c.add({o->mode, o->completed ? "1" : "0", std::to_string(o->tasks), std::to_string(o->tasks_blocked),
           std::to_string(o->cycles_reported), std::to_string(o->barriers_done), std::to_string(o->barriers_total),
           std::to_string(o->end_ns), sim::to_string(o->stop), o->reports.empty() ? "" : o->reports.front()});
  }
  return c;
}

}  // namespace agile::bench
