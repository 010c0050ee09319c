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
 * @file config.hpp
 * @brief Run configuration and the key=value file format.
 *
 * A config file is plain text, one `key = value` per line, `#` starts a
 * comment. Device fields apply to every device (`device.<field>`) or to one
 * (`device[i].<field>`). `write_config` emits the canonical form that
 * `parse_config` reads back unchanged.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "agile/types.hpp"

namespace agile {

enum class Jitter { none, uniform, exponential };

const char* to_string(Jitter j);

struct DeviceConfig {
  std::uint64_t blocks = 1u << 20;
  std::uint32_t block_size = 4096;
  /// Per-command service time of one channel.
  sim::SimTime base_latency_ns = 70'850;
  /// 0 means "same as base_latency_ns".
  sim::SimTime write_latency_ns = 119'156;
  std::uint32_t parallelism = 64;
  Jitter jitter = Jitter::none;
  /// Uniform: +[0, jitter_ns); exponential: mean jitter_ns.
  sim::SimTime jitter_ns = 0;
  /// Empty for an in-memory store.
  std::string backing_file;
};

struct QueueConfig {
  /// Per device.
  std::uint32_t num_queue_pairs = 128;
  std::uint32_t queue_depth = 256;
};

enum class BusyEvictionChoice { wait, find_another };

struct CacheConfig {
  std::uint64_t lines = 1024;
  BusyEvictionChoice busy_choice = BusyEvictionChoice::wait;
};

struct ShareConfig {
  bool enabled = false;
  std::uint32_t buckets = 1024;
};

struct ServiceConfig {
  std::uint32_t warps = 4;
  /// Simulated cost of one window pass over a CQ.
  sim::SimTime pass_ns = 100;
};

/// Simulated costs of on-GPU protocol steps.
struct TimingConfig {
  sim::SimTime sqe_write_ns = 20;
  sim::SimTime doorbell_ns = 100;
  sim::SimTime retry_ns = 20;
  sim::SimTime sq_full_backoff_ns = 200;
  sim::SimTime api_overhead_ns = 50;
  sim::SimTime cache_copy_ns = 40;
};

struct RuntimeConfig {
  std::uint64_t seed = 1;
  bool randomize_ties = false;
  std::uint64_t livelock_budget = 20'000'000;
  bool lock_debug = true;
  std::vector<DeviceConfig> devices{DeviceConfig{}};
  QueueConfig queues;
  CacheConfig cache;
  ShareConfig share;
  ServiceConfig service;
  TimingConfig timing;
};

/// Workload knobs for the benchmark experiments.
struct WorkloadConfig {
  // ctc_sweep
  std::uint32_t threads = 1024;
  std::uint32_t iterations = 64;
  std::vector<double> ctc_points{0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.5, 2.0};
  // rand_read / rand_write
  std::vector<std::uint32_t> inflight_points{1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
  std::uint32_t requests_per_thread = 64;
  std::uint32_t max_devices = 3;
  // deadlock_demo
  std::string mode = "both";
  std::uint32_t demo_tasks = 4;
  std::uint32_t demo_commands_per_task = 2;
  std::uint32_t demo_depth = 2;
  sim::SimTime demo_limit_ns = 5'000'000;
  // queue_sweep / cache_sweep
  std::uint32_t gathers_per_epoch = 1024;
  sim::SimTime compute_ns_per_gather = 200;
  std::uint32_t epochs = 4;
  std::uint32_t gather_threads = 256;
  std::uint64_t table_blocks = 65536;
  std::vector<std::uint32_t> queue_pair_points{1, 2, 4, 8, 16};
  std::vector<std::uint64_t> cache_line_points{64, 256, 1024, 4096, 16384};
};

struct ExperimentConfig {
  std::string experiment;
  RuntimeConfig runtime;
  WorkloadConfig workload;
};

/// Parses key=value text. Throws ConfigError on unknown keys or bad values.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Canonical serialization; `parse_config(write_config(c))` reproduces `c`.
std::string write_config(const ExperimentConfig& cfg);

/// Applies one `key = value` assignment.
void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace agile
