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
 * @file host.hpp
 * @brief Owns one simulated system: devices, queue pairs, service, cache,
 * share table and the API controller.
 *
 * Typical use: construct, `launch` user tasks, then `run`. `run` starts the
 * service, waits for every user task, optionally flushes the cache, stops the
 * service and drains the event queue.
 */
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "agile/agile_service.hpp"
#include "agile/config.hpp"
#include "agile/gpu_api.hpp"
#include "agile/issuer.hpp"
#include "agile/lock_chain.hpp"
#include "agile/nvme_queue.hpp"
#include "agile/share_table.hpp"
#include "agile/sim.hpp"
#include "agile/software_cache.hpp"
#include "agile/ssd_model.hpp"

namespace agile {

struct RunReport {
  sim::SimStats sim;
  std::uint32_t user_tasks = 0;
  std::uint32_t user_tasks_unfinished = 0;
  std::uint32_t exits_holding_locks = 0;
};

class Runtime {
 public:
  using Body = std::function<sim::Co<void>(api::ThreadCtx&)>;

  explicit Runtime(RuntimeConfig cfg, std::unique_ptr<cache::CachePolicy> policy = nullptr);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const RuntimeConfig& config() const noexcept { return cfg_; }
  sim::Simulator& sim() noexcept { return sim_; }
  lock::LockDetector& detector() noexcept { return detector_; }
  ssd::SsdDevice& device(std::uint32_t i) { return *devices_.at(i); }
  std::size_t num_devices() const noexcept { return devices_.size(); }
  nvme::QueuePair& queue_pair(std::uint32_t i) { return *qps_.at(i); }
  std::size_t num_queue_pairs() const noexcept { return qps_.size(); }
  service::AgileService& service() noexcept { return *service_; }
  nvme::Issuer& issuer() noexcept { return *issuer_; }
  cache::SoftwareCache& cache() noexcept { return *cache_; }
  share::ShareTable* share_table() noexcept { return share_.get(); }
  api::AgileCtrl& ctrl() noexcept { return *ctrl_; }

  /// Spawns a user thread running `body` with its own ThreadCtx.
  sim::TaskId launch(std::string name, std::uint32_t thread_idx, Body body);

  /// Runs to completion (or `limit_ns`). With `flush`, MODIFIED lines are
  /// written back before the service stops.
  RunReport run(sim::SimTime limit_ns, bool flush = false);

  std::uint32_t active_users() const noexcept { return active_users_; }
  /// Formatted cycle reports from the lock detector, in report order.
  const std::vector<std::string>& deadlock_reports() const noexcept { return deadlock_reports_; }

 private:
  sim::Co<void> user_main(api::ThreadCtx& ctx, Body body);
  sim::Co<void> host_main(bool flush);

  RuntimeConfig cfg_;
  sim::Simulator sim_;
  lock::LockDetector detector_;
  std::vector<std::unique_ptr<ssd::SsdDevice>> devices_;
  std::vector<std::unique_ptr<nvme::QueuePair>> qps_;
  std::unique_ptr<service::AgileService> service_;
  std::unique_ptr<nvme::Issuer> issuer_;
  std::unique_ptr<cache::SoftwareCache> cache_;
  std::unique_ptr<share::ShareTable> share_;
  std::unique_ptr<api::AgileCtrl> ctrl_;
  std::deque<api::ThreadCtx> contexts_;
  std::vector<std::string> deadlock_reports_;
  sim::WaitQueue users_done_;
  std::uint32_t active_users_ = 0;
  std::uint32_t launched_ = 0;
  std::uint32_t exits_holding_locks_ = 0;
};

}  // namespace agile
