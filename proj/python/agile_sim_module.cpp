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
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "agile/bench.hpp"
#include "agile/coherence.hpp"
#include "agile/config.hpp"
#include "agile/gpu_api.hpp"

namespace py = pybind11;
using namespace agile;

namespace {

py::dict hygiene_dict(const bench::Hygiene& h) {
  py::dict d;
  d["runs"] = h.runs;
  d["commands"] = h.commands;
  d["audit_violations"] = h.audit_violations;
  d["unbalanced_runs"] = h.unbalanced_runs;
  d["exits_holding_locks"] = h.exits_holding_locks;
  d["waits_holding_locks"] = h.waits_holding_locks;
  d["deadlock_reports"] = h.deadlock_reports;
  d["unfinished_user_tasks"] = h.unfinished_user_tasks;
  d["livelock_stops"] = h.livelock_stops;
  d["trace_lines"] = h.trace_lines;
  d["digest"] = h.digest;
  d["clean"] = h.clean();
  d["messages"] = h.messages;
  return d;
}

py::dict outcome_dict(const bench::DeadlockOutcome& o) {
  py::dict d;
  d["mode"] = o.mode;
  d["completed"] = o.completed;
  d["tasks"] = o.tasks;
  d["tasks_blocked"] = o.tasks_blocked;
  d["cycles_reported"] = o.cycles_reported;
  d["reports"] = o.reports;
  d["barriers_done"] = o.barriers_done;
  d["barriers_total"] = o.barriers_total;
  d["end_ns"] = o.end_ns;
  d["stop_reason"] = std::string(sim::to_string(o.stop));
  return d;
}

nvme::Opcode opcode(const std::string& op) {
  if (op == "read") return nvme::Opcode::read;
  if (op == "write") return nvme::Opcode::write;
  throw ConfigError("op must be 'read' or 'write', got '" + op + "'");
}

// Runs `fn(monitor)` without the GIL, with an optional trace file.
template <typename F>
auto monitored(const std::optional<std::string>& trace_path, F&& fn) {
  std::unique_ptr<std::ofstream> trace;
  if (trace_path) {
    trace = std::make_unique<std::ofstream>(*trace_path, std::ios::binary);
    if (!*trace) throw ConfigError("cannot open trace file " + *trace_path);
  }
  bench::RunMonitor mon(trace.get());
  py::gil_scoped_release unlocked;
  auto out = fn(mon);
  return std::make_pair(std::move(out), mon.hygiene());
}

}  // namespace

PYBIND11_MODULE(_agile_sim, m) {
  m.doc() = "Deterministic simulator of asynchronous GPU-initiated SSD I/O";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ProtocolViolation>(m, "ProtocolViolation", PyExc_RuntimeError);

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_file", &load_config, py::arg("path"))
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
      }, py::arg("text"))
      .def("set", [](ExperimentConfig& c, const std::string& key, py::object value) {
        std::string v;
        if (py::isinstance<py::bool_>(value)) v = value.cast<bool>() ? "true" : "false";
        else v = py::str(value).cast<std::string>();
        apply_config_key(c, key, v);
        return &c;
      }, py::arg("key"), py::arg("value"), py::return_value_policy::reference_internal)
      .def("to_text", &write_config)
      .def("copy", [](const ExperimentConfig& c) { return c; })
      .def_property("experiment", [](const ExperimentConfig& c) { return c.experiment; },
                    [](ExperimentConfig& c, std::string v) { c.experiment = std::move(v); })
      .def_property("seed", [](const ExperimentConfig& c) { return c.runtime.seed; },
                    [](ExperimentConfig& c, std::uint64_t v) { c.runtime.seed = v; })
      .def("__repr__", [](const ExperimentConfig& c) {
        return "<agile_sim.Config experiment='" + c.experiment + "' seed=" + std::to_string(c.runtime.seed) + ">";
      });

  m.def("experiment_names", &bench::experiment_names);
  m.def("ideal_speedup", &bench::ideal_speedup, py::arg("ctc"));

  m.def("run_experiment", [](const std::string& name, const ExperimentConfig& cfg,
                             std::optional<std::string> trace_path) {
    auto [res, h] = monitored(trace_path, [&](bench::RunMonitor& mon) { return bench::run_experiment(name, cfg, mon); });
    py::dict d;
    d["csv"] = res.csv.str();
    d["header"] = res.csv.header;
    d["rows"] = res.csv.rows;
    d["agile_deadlock"] = res.agile_deadlock;
    d["hygiene"] = hygiene_dict(h);
    if (res.deadlock) {
      if (res.deadlock->naive) d["naive"] = outcome_dict(*res.deadlock->naive);
      if (res.deadlock->agile) d["agile"] = outcome_dict(*res.deadlock->agile);
    }
    return d;
  }, py::arg("name"), py::arg("config") = ExperimentConfig{}, py::arg("trace_path") = std::nullopt);

  m.def("rand_rw_point", [](const ExperimentConfig& cfg, const std::string& op, std::uint32_t devices,
                            std::uint32_t inflight) {
    const nvme::Opcode code = opcode(op);
    auto [row, h] = monitored(std::nullopt, [&](bench::RunMonitor& mon) {
      return bench::rand_rw_point(cfg, code, devices, inflight, mon);
    });
    py::dict d;
    d["inflight"] = row.inflight;
    d["devices"] = row.devices;
    d["elapsed_ns"] = row.elapsed_ns;
    d["bytes"] = row.bytes;
    d["gb_per_s"] = row.gb_per_s;
    d["hygiene"] = hygiene_dict(h);
    return d;
  }, py::arg("config"), py::arg("op") = "read", py::arg("devices") = 1, py::arg("inflight") = 1);

  m.def("gather_run", [](const ExperimentConfig& cfg, bool async) {
    auto [g, h] = monitored(std::nullopt, [&](bench::RunMonitor& mon) { return bench::gather_run(cfg, async, mon); });
    py::dict d;
    d["elapsed_ns"] = g.elapsed_ns;
    d["device_reads"] = g.device_reads;
    d["hygiene"] = hygiene_dict(h);
    return d;
  }, py::arg("config"), py::arg("use_async") = true);

  m.def("issuers", [](const ExperimentConfig& cfg, const std::string& mode, std::uint32_t depth) {
    if (mode != "naive" && mode != "agile") throw ConfigError("mode must be 'naive' or 'agile'");
    auto [o, h] = monitored(std::nullopt, [&](bench::RunMonitor& mon) {
      return mode == "naive" ? bench::run_naive_issuers(cfg, depth, mon) : bench::run_agile_issuers(cfg, depth, mon);
    });
    py::dict d = outcome_dict(o);
    d["hygiene"] = hygiene_dict(h);
    return d;
  }, py::arg("config"), py::arg("mode") = "agile", py::arg("depth") = 2);

  m.def("coherence_run", [](std::uint64_t seed, std::uint32_t tasks, std::uint32_t blocks, std::uint32_t ops_per_task,
                            bool share_table, std::uint64_t cache_lines, std::uint32_t queue_depth) {
    coherence::Params p;
    p.seed = seed;
    p.tasks = tasks;
    p.blocks = blocks;
    p.ops_per_task = ops_per_task;
    p.share_table = share_table;
    p.cache_lines = cache_lines;
    p.queue_depth = queue_depth;
    auto [r, h] = monitored(std::nullopt, [&](bench::RunMonitor& mon) { return coherence::run(p, mon); });
    py::dict d;
    d["reads"] = r.reads;
    d["writes"] = r.writes;
    d["stale_reads"] = r.stale_reads;
    d["final_mismatches"] = r.final_mismatches;
    d["unfinished_tasks"] = r.unfinished_tasks;
    d["equivalent"] = r.equivalent();
    d["notes"] = r.notes;
    d["hygiene"] = hygiene_dict(h);
    return d;
  }, py::arg("seed"), py::arg("tasks") = 4, py::arg("blocks") = 4, py::arg("ops_per_task") = 8,
     py::arg("share_table") = true, py::arg("cache_lines") = 2, py::arg("queue_depth") = 4);

  m.def("warp_coalesce", [](const std::vector<std::optional<std::tuple<std::uint32_t, std::uint64_t>>>& lanes) {
    std::vector<std::optional<BlockKey>> keys;
    for (const auto& l : lanes) {
      if (l) keys.push_back(BlockKey{std::get<0>(*l), std::get<1>(*l)});
      else keys.push_back(std::nullopt);
    }
    const api::CoalesceResult r = api::warp_coalesce(keys);
    std::vector<std::tuple<std::uint32_t, std::uint64_t>> unique;
    for (const auto& k : r.unique) unique.emplace_back(k.dev, k.blk);
    py::dict d;
    d["unique"] = unique;
    d["leaders"] = r.leaders;
    d["group"] = r.group;
    return d;
  }, py::arg("lanes"));
}
