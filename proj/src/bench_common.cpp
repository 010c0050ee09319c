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
#include <cstdio>
#include <sstream>

#include "agile/bench.hpp"

namespace agile::bench {

std::string Csv::str() const {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

void RunMonitor::fold(std::uint64_t digest, std::uint64_t lines) {
  for (int i = 0; i < 8; ++i) {
    h_.digest ^= (digest >> (8 * i)) & 0xff;
    h_.digest *= 0x100000001b3ull;
  }
  h_.trace_lines += lines;
  ++h_.runs;
}

void RunMonitor::begin_raw(sim::Simulator& sim) {
  sim.trace().enable_digest(true);
  sim.trace().set_sink(sink_);
}

void RunMonitor::end_raw(sim::Simulator& sim) {
  fold(sim.trace().digest(), sim.trace().lines());
  sim.trace().set_sink(nullptr);
}

void RunMonitor::begin(Runtime& rt) {
  begin_raw(rt.sim());
  auditors_.push_back(std::make_unique<audit::ProtocolAuditor>());
  auditors_.back()->attach(rt.sim());
}

void RunMonitor::end(Runtime& rt, const RunReport& report) {
  const audit::ProtocolAuditor& a = *auditors_.back();
  h_.audit_violations += a.violations();
  h_.commands += a.counts().enqueues;
  if (!a.balanced()) {
    ++h_.unbalanced_runs;
    h_.messages.push_back("run " + std::to_string(h_.runs) + ": command stages unbalanced");
  }
  for (const auto& m : a.messages()) {
    if (h_.messages.size() < audit::ProtocolAuditor::kMaxMessages) h_.messages.push_back(m);
  }
  h_.exits_holding_locks += report.exits_holding_locks;
  h_.waits_holding_locks += rt.ctrl().stats().waits_holding_locks;
  h_.deadlock_reports += rt.detector().reports();
  h_.unfinished_user_tasks += report.user_tasks_unfinished;
  if (report.sim.stop_reason == sim::StopReason::livelock_suspected) ++h_.livelock_stops;
  end_raw(rt.sim());
}

RunReport monitored_run(Runtime& rt, RunMonitor& mon, bool flush, sim::SimTime limit_ns) {
  mon.begin(rt);
  RunReport r = rt.run(limit_ns, flush);
  mon.end(rt, r);
  return r;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"ctc_sweep",     "rand_read",   "rand_write",
                                              "deadlock_demo", "queue_sweep", "cache_sweep"};
  return names;
}

ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, RunMonitor& mon) {
  ExperimentResult r;
  if (name == "ctc_sweep") {
    r.csv = ctc_csv(run_ctc_sweep(cfg, mon));
  } else if (name == "rand_read") {
    r.csv = rand_rw_csv(run_rand_rw(cfg, nvme::Opcode::read, mon));
  } else if (name == "rand_write") {
    r.csv = rand_rw_csv(run_rand_rw(cfg, nvme::Opcode::write, mon));
  } else if (name == "queue_sweep") {
    r.csv = sweep_csv("queue_pairs", run_queue_sweep(cfg, mon));
  } else if (name == "cache_sweep") {
    r.csv = sweep_csv("cache_lines", run_cache_sweep(cfg, mon));
  } else if (name == "deadlock_demo") {
    r.deadlock = run_deadlock_demo(cfg, mon);
    r.csv = deadlock_csv(*r.deadlock);
    if (r.deadlock->agile && (!r.deadlock->agile->completed || r.deadlock->agile->cycles_reported > 0)) {
      r.agile_deadlock = true;
    }
  } else {
    throw ConfigError("unknown experiment '" + name + "'");
  }
  if (mon.hygiene().deadlock_reports > 0) r.agile_deadlock = true;
  return r;
}

}  // namespace agile::bench
