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
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agile/bench.hpp"
#include "agile/config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDeadlock = 2;

void print_hygiene(const agile::bench::Hygiene& h) {
  std::fprintf(stderr,
               "runs=%llu commands=%llu audit_violations=%llu unbalanced_runs=%llu exits_holding_locks=%llu "
               "waits_holding_locks=%llu deadlock_reports=%llu unfinished_user_tasks=%llu livelock_stops=%llu "
               "trace_digest=%016llx\n",
               static_cast<unsigned long long>(h.runs), static_cast<unsigned long long>(h.commands),
               static_cast<unsigned long long>(h.audit_violations), static_cast<unsigned long long>(h.unbalanced_runs),
               static_cast<unsigned long long>(h.exits_holding_locks),
               static_cast<unsigned long long>(h.waits_holding_locks),
               static_cast<unsigned long long>(h.deadlock_reports),
               static_cast<unsigned long long>(h.unfinished_user_tasks), static_cast<unsigned long long>(h.livelock_stops),
               static_cast<unsigned long long>(h.digest));
  for (const auto& m : h.messages) std::fprintf(stderr, "audit: %s\n", m.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  using namespace agile;
  CLI::App app{"Deterministic simulator of asynchronous GPU-initiated SSD I/O"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string trace_path;
  std::string csv_path;
  std::vector<std::string> overrides;
  app.add_option("experiment", experiment, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(bench::experiment_names()));
  app.add_option("--config", config_path, "Key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--trace", trace_path, "Write the event trace here");
  app.add_option("--csv", csv_path, "Write the result table here (default: stdout)");
  app.add_option("--set", overrides, "Extra key=value settings, applied after the config file");
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.runtime.seed = *seed;
    cfg.experiment = experiment;

    std::unique_ptr<std::ofstream> trace;
    if (!trace_path.empty()) {
      trace = std::make_unique<std::ofstream>(trace_path, std::ios::binary);
      if (!*trace) throw ConfigError("cannot open trace file " + trace_path);
    }
    bench::RunMonitor mon(trace.get());

    const bench::ExperimentResult result = bench::run_experiment(experiment, cfg, mon);
    const bench::Csv& csv = result.csv;
    if (result.deadlock && result.deadlock->naive) {
      const auto& naive = *result.deadlock->naive;
      for (const auto& r : naive.reports) std::fprintf(stderr, "naive: %s\n", r.c_str());
      if (!naive.completed) {
        std::fprintf(stderr, "naive: expected deadlock, %u of %u tasks blocked\n", naive.tasks_blocked, naive.tasks);
      }
    }
    if (result.deadlock && result.deadlock->agile && !result.deadlock->agile->completed) {
      for (const auto& r : result.deadlock->agile->reports) std::fprintf(stderr, "agile: %s\n", r.c_str());
      std::fprintf(stderr, "agile: deadlock\n");
    }
    const int code = result.agile_deadlock ? kExitDeadlock : kExitOk;

    if (csv_path.empty()) {
      std::cout << csv.str();
    } else {
      std::ofstream out(csv_path, std::ios::binary);
      if (!out) throw ConfigError("cannot open csv file " + csv_path);
      out << csv.str();
    }
    print_hygiene(mon.hygiene());
    return code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "agile-sim: %s\n", e.what());
    return kExitError;
  }
}
