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
#include "agile/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace agile {

const char* to_string(Jitter j) {
  switch (j) {
    case Jitter::none: return "none";
    case Jitter::uniform: return "uniform";
    case Jitter::exponential: return "exponential";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("bad integer for '" + key + "': '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad number for '" + key + "': '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& v, F&& one) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(one(item));
  }
  return out;
}

void apply_device_field(DeviceConfig& d, const std::string& key, const std::string& field, const std::string& v) {
  if (field == "blocks") d.blocks = parse_int<std::uint64_t>(key, v);
  else if (field == "block_size") d.block_size = parse_int<std::uint32_t>(key, v);
  else if (field == "base_latency_ns") d.base_latency_ns = parse_int<std::uint64_t>(key, v);
  else if (field == "write_latency_ns") d.write_latency_ns = parse_int<std::uint64_t>(key, v);
  else if (field == "parallelism") d.parallelism = parse_int<std::uint32_t>(key, v);
  else if (field == "jitter_ns") d.jitter_ns = parse_int<std::uint64_t>(key, v);
  else if (field == "backing_file") d.backing_file = v;
  else if (field == "jitter") {
    if (v == "none") d.jitter = Jitter::none;
    else if (v == "uniform") d.jitter = Jitter::uniform;
    else if (v == "exponential") d.jitter = Jitter::exponential;
    else throw ConfigError("bad jitter '" + v + "'");
  } else {
    throw ConfigError("unknown device field '" + field + "'");
  }
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    // Shortest form that parses back to the same value.
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, xs[i]);
    out.append(buf, end);
  }
  return out;
}

}  // namespace

void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& v) {
  RuntimeConfig& r = cfg.runtime;
  WorkloadConfig& w = cfg.workload;
  if (key == "experiment") cfg.experiment = v;
  else if (key == "seed") r.seed = parse_int<std::uint64_t>(key, v);
  else if (key == "randomize_ties") r.randomize_ties = parse_bool(key, v);
  else if (key == "livelock_budget") r.livelock_budget = parse_int<std::uint64_t>(key, v);
  else if (key == "lock_debug") r.lock_debug = parse_bool(key, v);
  else if (key == "devices") r.devices.resize(parse_int<std::uint32_t>(key, v), r.devices.empty() ? DeviceConfig{} : r.devices.front());
  else if (key.starts_with("device.")) {
    for (auto& d : r.devices) apply_device_field(d, key, key.substr(7), v);
  } else if (key.starts_with("device[")) {
    const auto close = key.find("].");
    if (close == std::string::npos) throw ConfigError("bad device key '" + key + "'");
    const auto i = parse_int<std::uint32_t>(key, key.substr(7, close - 7));
    if (i >= r.devices.size()) r.devices.resize(i + 1, r.devices.empty() ? DeviceConfig{} : r.devices.back());
    apply_device_field(r.devices[i], key, key.substr(close + 2), v);
  } else if (key == "num_queue_pairs") r.queues.num_queue_pairs = parse_int<std::uint32_t>(key, v);
  else if (key == "queue_depth") r.queues.queue_depth = parse_int<std::uint32_t>(key, v);
  else if (key == "cache_lines") r.cache.lines = parse_int<std::uint64_t>(key, v);
  else if (key == "cache_bytes") {
    const std::uint32_t bs = r.devices.empty() ? 4096 : r.devices.front().block_size;
    r.cache.lines = std::max<std::uint64_t>(1, parse_int<std::uint64_t>(key, v) / bs);
  } else if (key == "cache.busy_eviction") {
    if (v == "wait") r.cache.busy_choice = BusyEvictionChoice::wait;
    else if (v == "find_another") r.cache.busy_choice = BusyEvictionChoice::find_another;
    else throw ConfigError("bad cache.busy_eviction '" + v + "'");
  } else if (key == "share_table.enabled") r.share.enabled = parse_bool(key, v);
  else if (key == "share_table.buckets") r.share.buckets = parse_int<std::uint32_t>(key, v);
  else if (key == "service.warps") r.service.warps = parse_int<std::uint32_t>(key, v);
  else if (key == "service.pass_ns") r.service.pass_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "timing.sqe_write_ns") r.timing.sqe_write_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "timing.doorbell_ns") r.timing.doorbell_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "timing.retry_ns") r.timing.retry_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "timing.sq_full_backoff_ns") r.timing.sq_full_backoff_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "timing.api_overhead_ns") r.timing.api_overhead_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "timing.cache_copy_ns") r.timing.cache_copy_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "threads") w.threads = parse_int<std::uint32_t>(key, v);
  else if (key == "iterations") w.iterations = parse_int<std::uint32_t>(key, v);
  else if (key == "ctc_points") w.ctc_points = parse_list<double>(v, [&](const std::string& s) { return parse_double(key, s); });
  else if (key == "inflight_points") w.inflight_points = parse_list<std::uint32_t>(v, [&](const std::string& s) { return parse_int<std::uint32_t>(key, s); });
  else if (key == "requests_per_thread") w.requests_per_thread = parse_int<std::uint32_t>(key, v);
  else if (key == "max_devices") w.max_devices = parse_int<std::uint32_t>(key, v);
  else if (key == "mode") w.mode = v;
  else if (key == "demo.tasks") w.demo_tasks = parse_int<std::uint32_t>(key, v);
  else if (key == "demo.commands_per_task") w.demo_commands_per_task = parse_int<std::uint32_t>(key, v);
  else if (key == "demo.depth") w.demo_depth = parse_int<std::uint32_t>(key, v);
  else if (key == "demo.limit_ns") w.demo_limit_ns = parse_int<std::uint64_t>(key, v);
  else if (key == "gathers_per_epoch") w.gathers_per_epoch = parse_int<std::uint32_t>(key, v);
  else if (key == "compute_ns_per_gather") w.compute_ns_per_gather = parse_int<std::uint64_t>(key, v);
  else if (key == "epochs") w.epochs = parse_int<std::uint32_t>(key, v);
  else if (key == "gather_threads") w.gather_threads = parse_int<std::uint32_t>(key, v);
  else if (key == "table_blocks") w.table_blocks = parse_int<std::uint64_t>(key, v);
  else if (key == "queue_pair_points") w.queue_pair_points = parse_list<std::uint32_t>(v, [&](const std::string& s) { return parse_int<std::uint32_t>(key, s); });
  else if (key == "cache_line_points") w.cache_line_points = parse_list<std::uint64_t>(v, [&](const std::string& s) { return parse_int<std::uint64_t>(key, s); });
  else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_config_key(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in);
}

std::string write_config(const ExperimentConfig& cfg) {
  const RuntimeConfig& r = cfg.runtime;
  const WorkloadConfig& w = cfg.workload;
  std::ostringstream os;
  os.precision(17);
  if (!cfg.experiment.empty()) os << "experiment = " << cfg.experiment << '\n';
  os << "seed = " << r.seed << '\n'
     << "randomize_ties = " << (r.randomize_ties ? "true" : "false") << '\n'
     << "livelock_budget = " << r.livelock_budget << '\n'
     << "lock_debug = " << (r.lock_debug ? "true" : "false") << '\n'
     << "devices = " << r.devices.size() << '\n';
  for (std::size_t i = 0; i < r.devices.size(); ++i) {
    const DeviceConfig& d = r.devices[i];
    const std::string p = "device[" + std::to_string(i) + "].";
    os << p << "blocks = " << d.blocks << '\n'
       << p << "block_size = " << d.block_size << '\n'
       << p << "base_latency_ns = " << d.base_latency_ns << '\n'
       << p << "write_latency_ns = " << d.write_latency_ns << '\n'
       << p << "parallelism = " << d.parallelism << '\n'
       << p << "jitter = " << to_string(d.jitter) << '\n'
       << p << "jitter_ns = " << d.jitter_ns << '\n'
       << p << "backing_file = " << d.backing_file << '\n';
  }
  os << "num_queue_pairs = " << r.queues.num_queue_pairs << '\n'
     << "queue_depth = " << r.queues.queue_depth << '\n'
     << "cache_lines = " << r.cache.lines << '\n'
     << "cache.busy_eviction = " << (r.cache.busy_choice == BusyEvictionChoice::wait ? "wait" : "find_another") << '\n'
     << "share_table.enabled = " << (r.share.enabled ? "true" : "false") << '\n'
     << "share_table.buckets = " << r.share.buckets << '\n'
     << "service.warps = " << r.service.warps << '\n'
     << "service.pass_ns = " << r.service.pass_ns << '\n'
     << "timing.sqe_write_ns = " << r.timing.sqe_write_ns << '\n'
     << "timing.doorbell_ns = " << r.timing.doorbell_ns << '\n'
     << "timing.retry_ns = " << r.timing.retry_ns << '\n'
     << "timing.sq_full_backoff_ns = " << r.timing.sq_full_backoff_ns << '\n'
     << "timing.api_overhead_ns = " << r.timing.api_overhead_ns << '\n'
     << "timing.cache_copy_ns = " << r.timing.cache_copy_ns << '\n'
     << "threads = " << w.threads << '\n'
     << "iterations = " << w.iterations << '\n'
     << "ctc_points = " << join(w.ctc_points) << '\n'
     << "inflight_points = " << join(w.inflight_points) << '\n'
     << "requests_per_thread = " << w.requests_per_thread << '\n'
     << "max_devices = " << w.max_devices << '\n'
     << "mode = " << w.mode << '\n'
     << "demo.tasks = " << w.demo_tasks << '\n'
     << "demo.commands_per_task = " << w.demo_commands_per_task << '\n'
     << "demo.depth = " << w.demo_depth << '\n'
     << "demo.limit_ns = " << w.demo_limit_ns << '\n'
     << "gathers_per_epoch = " << w.gathers_per_epoch << '\n'
     << "compute_ns_per_gather = " << w.compute_ns_per_gather << '\n'
     << "epochs = " << w.epochs << '\n'
     << "gather_threads = " << w.gather_threads << '\n'
     << "table_blocks = " << w.table_blocks << '\n'
     << "queue_pair_points = " << join(w.queue_pair_points) << '\n'
     << "cache_line_points = " << join(w.cache_line_points) << '\n';
  return os.str();
}

}  // namespace agile
