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
 * @file agile_service.hpp
 * @brief Completion-polling daemon.
 *
 * A handful of service warps poll the completion queues. Warp w owns CQs
 * w, w + W, w + 2W, ... and visits them round-robin. Each visit is one pass
 * over a 32-entry window: lanes whose CQE carries the expected phase process
 * it (release the SQE, complete the transaction, run the completion hook) and
 * set their mask bit. The CQ doorbell is rung only when the whole window is
 * done, then the window slides by 32.
 *
 * At shutdown, once no command is outstanding, a drain pass rings whatever
 * partial window remains on each CQ so the device sees every entry consumed.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "agile/barrier.hpp"
#include "agile/config.hpp"
#include "agile/nvme_queue.hpp"
#include "agile/sim.hpp"
#include "agile/ssd_model.hpp"

namespace agile::service {

struct PollResult {
  std::uint32_t processed = 0;
  bool rang = false;
};

struct ServiceStats {
  std::uint64_t completions = 0;
  std::uint64_t windows_rung = 0;
  std::uint64_t drain_rings = 0;
  std::uint64_t drained_entries = 0;
  std::uint64_t passes = 0;
  std::uint64_t barrier_latency_sum_ns = 0;
  std::uint64_t barriers_completed = 0;

  double mean_barrier_latency_ns() const noexcept {
    return barriers_completed == 0 ? 0.0
                                   : static_cast<double>(barrier_latency_sum_ns) / static_cast<double>(barriers_completed);
  }
};

class AgileService {
 public:
  AgileService(sim::Simulator& sim, ServiceConfig cfg, std::vector<nvme::QueuePair*> qps,
               std::vector<ssd::SsdDevice*> devices);

  std::uint32_t num_warps() const noexcept { return cfg_.warps; }
  std::size_t num_cqs() const noexcept { return qps_.size(); }

  /// Spawns the service warps.
  void start();
  /// Warps exit once nothing is outstanding.
  void request_stop();
  bool running() const noexcept { return running_ > 0; }

  /// One window pass over `cq`.
  PollResult cq_polling(std::uint32_t cq);
  /// Handles the CQE at absolute position `pos` of `cq` if its phase matches.
  bool process_cqe(std::uint32_t cq, std::uint64_t pos, std::uint8_t phase);
  /// Rings the remaining partial window of `cq`; returns entries rung.
  std::uint32_t drain(std::uint32_t cq);

  /// Issue-side bookkeeping: a command is now tracked by the service.
  void command_registered();
  std::uint64_t outstanding() const noexcept { return outstanding_; }

  /// CQ index sequence visited by `warp` (one rotation).
  std::vector<std::uint32_t> rotation(std::uint32_t warp) const;

  const ServiceStats& stats() const noexcept { return stats_; }
  nvme::QueuePair& queue_pair(std::uint32_t cq) { return *qps_.at(cq); }

 private:
  sim::Co<void> warp_loop(std::uint32_t warp);
  void ring(nvme::QueuePair& qp, std::uint64_t new_head, std::uint32_t count, bool drain);

  sim::Simulator& sim_;
  ServiceConfig cfg_;
  std::vector<nvme::QueuePair*> qps_;
  std::vector<ssd::SsdDevice*> devices_;
  sim::WaitQueue idle_;
  std::uint64_t outstanding_ = 0;
  std::uint32_t running_ = 0;
  bool stop_ = false;
  ServiceStats stats_;
};

}  // namespace agile::service
