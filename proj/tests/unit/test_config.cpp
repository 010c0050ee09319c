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
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "agile/config.hpp"
#include "doctest.h"

using namespace agile;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST_CASE("defaults match the calibrated device") {
  ExperimentConfig c;
  REQUIRE(c.runtime.devices.size() == 1);
  CHECK(c.runtime.devices[0].block_size == 4096);
  CHECK(c.runtime.devices[0].base_latency_ns == 70'850);
  CHECK(c.runtime.devices[0].parallelism == 64);
  CHECK(c.runtime.service.warps == 4);
  CHECK(c.runtime.cache.busy_choice == BusyEvictionChoice::wait);
  CHECK_FALSE(c.runtime.share.enabled);
}

TEST_CASE("keys, comments and lists parse") {
  auto c = parse(
      "# comment\n"
      "experiment = rand_read   # trailing\n"
      "\n"
      "seed = 42\n"
      "randomize_ties = yes\n"
      "devices = 3\n"
      "device.parallelism = 16\n"
      "device[2].jitter = exponential\n"
      "device[2].jitter_ns = 500\n"
      "num_queue_pairs = 4\n"
      "queue_depth = 32\n"
      "cache_bytes = 1048576\n"
      "cache.busy_eviction = find_another\n"
      "share_table.enabled = on\n"
      "inflight_points = 1, 4 ,16\n"
      "ctc_points = 0.5,1.25\n");
  CHECK(c.experiment == "rand_read");
  CHECK(c.runtime.seed == 42);
  CHECK(c.runtime.randomize_ties);
  REQUIRE(c.runtime.devices.size() == 3);
  for (auto& d : c.runtime.devices) CHECK(d.parallelism == 16);
  CHECK(c.runtime.devices[2].jitter == Jitter::exponential);
  CHECK(c.runtime.devices[2].jitter_ns == 500);
  CHECK(c.runtime.devices[0].jitter == Jitter::none);
  CHECK(c.runtime.queues.num_queue_pairs == 4);
  CHECK(c.runtime.cache.lines == 256);
  CHECK(c.runtime.cache.busy_choice == BusyEvictionChoice::find_another);
  CHECK(c.runtime.share.enabled);
  CHECK(c.workload.inflight_points == std::vector<std::uint32_t>{1, 4, 16});
  CHECK(c.workload.ctc_points == std::vector<double>{0.5, 1.25});
}

TEST_CASE("bad input is reported") {
  CHECK_THROWS_AS(parse("nonsense = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("lock_debug = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("device.jitter = gaussian\n"), ConfigError);
  CHECK_THROWS_AS(parse("device.colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse("device[x].blocks = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("cache.busy_eviction = never\n"), ConfigError);
  CHECK_THROWS_AS(parse("ctc_points = 1,x\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/agile.conf"), ConfigError);
}

TEST_CASE("serialization round-trips") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> int_keys = {
      "seed", "livelock_budget", "num_queue_pairs", "queue_depth", "cache_lines", "share_table.buckets",
      "service.warps", "service.pass_ns", "timing.sqe_write_ns", "timing.retry_ns", "threads", "iterations",
      "requests_per_thread", "demo.tasks", "demo.depth", "epochs", "table_blocks", "gather_threads"};
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig c;
    c.experiment = "queue_sweep";
    for (int k = 0; k < 12; ++k) {
      apply_config_key(c, int_keys[rng() % int_keys.size()], std::to_string(rng() % 100000));
    }
    apply_config_key(c, "devices", std::to_string(1 + rng() % 4));
    apply_config_key(c, "device[" + std::to_string(rng() % 4) + "].jitter", rng() % 2 ? "uniform" : "none");
    apply_config_key(c, "device[0].backing_file", rng() % 2 ? "/tmp/x.img" : "");
    apply_config_key(c, "randomize_ties", rng() % 2 ? "true" : "false");
    apply_config_key(c, "ctc_points", std::to_string(static_cast<double>(rng() % 1000) / 7.0) + ",0.1");
    apply_config_key(c, "cache_line_points", "64," + std::to_string(rng() % 9999));
    const std::string once = write_config(c);
    const auto back = parse(once);
    REQUIRE(write_config(back) == once);
    CHECK(back.runtime.devices.size() == c.runtime.devices.size());
    CHECK(back.workload.ctc_points == c.workload.ctc_points);
    CHECK(back.runtime.seed == c.runtime.seed);
  }
}

TEST_CASE("shipped configs load") {
  const std::filesystem::path dir = std::filesystem::path(AGILE_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".conf") continue;
    INFO(e.path().string());
    auto c = load_config(e.path().string());
    CHECK(c.experiment == e.path().stem().string());
    CHECK(write_config(parse(write_config(c))) == write_config(c));
    ++n;
  }
  CHECK(n == 6);
}
