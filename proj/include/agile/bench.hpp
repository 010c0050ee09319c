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

/**
 * @file bench.hpp
 * @brief Micro-benchmark drivers behind the `agile-sim` tool.
 *
 * Every experiment builds fresh simulators from an ExperimentConfig, so a
 * config plus seed reproduces the same rows and the same trace bytes. A
 * RunMonitor watches each simulator of an experiment: it audits the queue
 * protocol, counts lock-hygiene events and folds all trace digests together.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agile/audit.hpp"
#include "agile/config.hpp"
#include "agile/host.hpp"
#include "agile/nvme_queue.hpp"

namespace agile::bench {

/// Header plus rows; `str()` renders RFC 4180-style CSV without quoting.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string str() const;
};

/// Fixed-precision decimal rendering used in every CSV.
std::string fmt(double v, int precision = 6);

struct Hygiene {
  std::uint64_t runs = 0;
  std::uint64_t audit_violations = 0;
  std::uint64_t unbalanced_runs = 0;
  std::uint64_t commands = 0;
  std::uint64_t exits_holding_locks = 0;
  std::uint64_t waits_holding_locks = 0;
  std::uint64_t deadlock_reports = 0;
  std::uint64_t unfinished_user_tasks = 0;
  std::uint64_t livelock_stops = 0;
  std::uint64_t trace_lines = 0;
  std::uint64_t digest = 0xcbf29ce484222325ull;
  std::vector<std::string> messages;

  bool clean() const noexcept {
    return audit_violations == 0 && unbalanced_runs == 0 && exits_holding_locks == 0 && waits_holding_locks == 0 &&
           deadlock_reports == 0 && unfinished_user_tasks == 0 && livelock_stops == 0;
  }
};

class RunMonitor {
 public:
  explicit RunMonitor(std::ostream* trace_sink = nullptr) : sink_(trace_sink) {}

  /// Hooks tracing, digest and an auditor into `rt` before it runs.
  void begin(Runtime& rt);
  /// Folds the finished run into the totals.
  void end(Runtime& rt, const RunReport& report);

  /// For runs outside a Runtime (the naive demo): digest only.
  void begin_raw(sim::Simulator& sim);
  void end_raw(sim::Simulator& sim);

  const Hygiene& hygiene() const noexcept { return h_; }

 private:
  void fold(std::uint64_t digest, std::uint64_t lines);

  std::ostream* sink_;
  std::vector<std::unique_ptr<audit::ProtocolAuditor>> auditors_;
  Hygiene h_;
};

/// Runs `rt` to completion under `mon` and returns the report.
RunReport monitored_run(Runtime& rt, RunMonitor& mon, bool flush = false,
                        sim::SimTime limit_ns = std::numeric_limits<sim::SimTime>::max());

// --- CTC sweep -----------------------------------------------------------

struct CtcRow {
  double ctc = 0;
  sim::SimTime t_sync = 0;
  sim::SimTime t_async = 0;
  double speedup = 0;
  double ideal = 0;
};

/// Best case of overlapping compute with communication for a given ratio.
double ideal_speedup(double ctc);

/// One pass of the CTC workload with `compute_ns` per iteration; returns the
/// time the last thread finished.
sim::SimTime ctc_run(const ExperimentConfig& cfg, bool async, sim::SimTime compute_ns, RunMonitor& mon);
std::vector<CtcRow> run_ctc_sweep(const ExperimentConfig& cfg, RunMonitor& mon);
Csv ctc_csv(const std::vector<CtcRow>& rows);

// --- random read / write -------------------------------------------------

struct RwRow {
  std::uint32_t inflight = 0;
  std::uint32_t devices = 0;
  sim::SimTime elapsed_ns = 0;
  std::uint64_t bytes = 0;
  double gb_per_s = 0;
};

/// One point: `inflight` threads each issuing requests back to back.
RwRow rand_rw_point(const ExperimentConfig& cfg, nvme::Opcode op, std::uint32_t devices, std::uint32_t inflight,
                    RunMonitor& mon);
std::vector<RwRow> run_rand_rw(const ExperimentConfig& cfg, nvme::Opcode op, RunMonitor& mon);
Csv rand_rw_csv(const std::vector<RwRow>& rows);

// --- gather sweeps -------------------------------------------------------

struct GatherResult {
  sim::SimTime elapsed_ns = 0;
  std::uint64_t device_reads = 0;
};

/// Synthetic embedding-lookup workload: per epoch, random block gathers
/// followed by compute. Async mode prefetches the next epoch during compute.
GatherResult gather_run(const ExperimentConfig& cfg, bool async, RunMonitor& mon);

struct SweepRow {
  std::uint64_t value = 0;
  GatherResult sync;
  GatherResult async;
  /// t_sync / t_async.
  double speedup = 0;
};

std::vector<SweepRow> run_queue_sweep(const ExperimentConfig& cfg, RunMonitor& mon);
std::vector<SweepRow> run_cache_sweep(const ExperimentConfig& cfg, RunMonitor& mon);
Csv sweep_csv(const char* param, const std::vector<SweepRow>& rows);

// --- deadlock demonstration ----------------------------------------------

struct DeadlockOutcome {
  std::string mode;
  bool completed = false;
  std::uint32_t tasks = 0;
  std::uint32_t tasks_blocked = 0;
  std::uint64_t cycles_reported = 0;
  std::vector<std::string> reports;
  std::uint32_t barriers_done = 0;
  std::uint32_t barriers_total = 0;
  sim::SimTime end_ns = 0;
  sim::StopReason stop = sim::StopReason::quiescent;
};

/// Issuers that own their SQE until they personally consume its completion.
DeadlockOutcome run_naive_issuers(const ExperimentConfig& cfg, std::uint32_t depth, RunMonitor& mon);
/// The same workload through the issuer and the background service.
DeadlockOutcome run_agile_issuers(const ExperimentConfig& cfg, std::uint32_t depth, RunMonitor& mon);

struct DeadlockReport {
  std::optional<DeadlockOutcome> naive;
  std::optional<DeadlockOutcome> agile;
};

/// `workload.mode` selects naive, agile or both.
DeadlockReport run_deadlock_demo(const ExperimentConfig& cfg, RunMonitor& mon);
Csv deadlock_csv(const DeadlockReport& r);

// --- dispatch --------------------------------------------------------------

/// Names accepted by run_experiment.
const std::vector<std::string>& experiment_names();

struct ExperimentResult {
  Csv csv;
  /// Set for deadlock_demo.
  std::optional<DeadlockReport> deadlock;
  /// The agile side deadlocked or a cycle was reported on an agile run.
  bool agile_deadlock = false;
};

ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, RunMonitor& mon);

}  // namespace agile::bench
