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
#include "agile/host.hpp"

namespace agile {

namespace {

sim::SchedulerOptions scheduler_options(const RuntimeConfig& cfg) {
  sim::SchedulerOptions o;
  o.seed = cfg.seed;
  o.randomize_ties = cfg.randomize_ties;
  o.livelock_budget = cfg.livelock_budget;
  return o;
}

}  // namespace

Runtime::Runtime(RuntimeConfig cfg, std::unique_ptr<cache::CachePolicy> policy)
    : cfg_(std::move(cfg)), sim_(scheduler_options(cfg_)), detector_(cfg_.lock_debug), users_done_(sim_) {
  if (cfg_.devices.empty()) throw ConfigError("at least one device is required");
  detector_.set_reporter([this](sim::TaskId task, std::span<const lock::LockId> cycle) {
    deadlock_reports_.push_back(lock::format_cycle_report(task, cycle));
    if (sim_.trace().enabled()) {
      sim_.trace().emit("lock", "deadlock", {{"task", task}}, deadlock_reports_.back());
    }
  });
  if (cfg_.queues.num_queue_pairs == 0) throw ConfigError("num_queue_pairs must be positive");
  const std::uint32_t block_size = cfg_.devices.front().block_size;
  std::vector<std::vector<nvme::QueuePair*>> by_dev(cfg_.devices.size());
  std::vector<nvme::QueuePair*> all;
  std::vector<ssd::SsdDevice*> devs;
  for (std::uint32_t d = 0; d < cfg_.devices.size(); ++d) {
    if (cfg_.devices[d].block_size != block_size) throw ConfigError("all devices must share one block size");
    devices_.push_back(std::make_unique<ssd::SsdDevice>(sim_, d, cfg_.devices[d]));
    devs.push_back(devices_.back().get());
    for (std::uint32_t q = 0; q < cfg_.queues.num_queue_pairs; ++q) {
      const auto idx = static_cast<std::uint32_t>(qps_.size());
      qps_.push_back(std::make_unique<nvme::QueuePair>(idx, d, cfg_.queues.queue_depth,
                                                       nvme::cq_depth_for(cfg_.queues.queue_depth), detector_));
      devices_.back()->bind(*qps_.back());
      by_dev[d].push_back(qps_.back().get());
      all.push_back(qps_.back().get());
    }
  }
  service_ = std::make_unique<service::AgileService>(sim_, cfg_.service, all, devs);
  issuer_ = std::make_unique<nvme::Issuer>(sim_, cfg_.timing, detector_, *service_, std::move(by_dev), devs);
  if (!policy) policy = std::make_unique<cache::ClockPolicy>(cfg_.cache.lines, cfg_.cache.busy_choice);
  cache_ = std::make_unique<cache::SoftwareCache>(sim_, cfg_.cache.lines, block_size, *issuer_, detector_,
                                                  std::move(policy));
  if (cfg_.share.enabled) share_ = std::make_unique<share::ShareTable>(cfg_.share.buckets, detector_);
  ctrl_ = std::make_unique<api::AgileCtrl>(sim_, *cache_, share_.get(), *issuer_, cfg_.timing);
}

Runtime::~Runtime() { sim_.destroy_tasks(); }

sim::TaskId Runtime::launch(std::string name, std::uint32_t thread_idx, Body body) {
  const auto task = static_cast<sim::TaskId>(sim_.task_count());
  contexts_.emplace_back(thread_idx, task);
  ++active_users_;
  ++launched_;
  const sim::TaskId id = sim_.spawn(sim::TaskKind::user_thread, std::move(name), user_main(contexts_.back(), std::move(body)));
  if (id != task) throw IllegalState("task id prediction failed");
  return id;
}

sim::Co<void> Runtime::user_main(api::ThreadCtx& ctx, Body body) {
  co_await body(ctx);
  if (!ctx.chain.empty()) {
    ++exits_holding_locks_;
    if (sim_.trace().enabled()) {
      sim_.trace().emit("api", "exit_holding_locks", {{"held", static_cast<std::int64_t>(ctx.chain.size())}});
    }
  }
  if (--active_users_ == 0) users_done_.notify_all();
}

sim::Co<void> Runtime::host_main(bool flush) {
  while (active_users_ > 0) co_await users_done_.wait();
  if (flush) {
    contexts_.emplace_back(0, sim_.current_task());
    co_await ctrl_->flush(contexts_.back());
  }
  service_->request_stop();
}

RunReport Runtime::run(sim::SimTime limit_ns, bool flush) {
  service_->start();
  sim_.spawn(sim::TaskKind::host, "host", host_main(flush));
  RunReport r;
  r.sim = sim_.run_until_quiescent(limit_ns);
  r.user_tasks = launched_;
  r.user_tasks_unfinished = active_users_;
  r.exits_holding_locks = exits_holding_locks_;
  return r;
}

}  // namespace agile
