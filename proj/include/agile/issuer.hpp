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
 * @file issuer.hpp
 * @brief Lock-free command submission.
 *
 * A thread picks an SQ of the target device from its thread index, moving to
 * the next SQ while the current one is full. It writes its command into the
 * claimed entry (EMPTY -> UPDATED) and then loops on the doorbell: whoever
 * holds the doorbell lock scans forward from the current doorbell value,
 * flips the contiguous UPDATED run to ISSUED and publishes the new tail once.
 * A thread is done as soon as its entry lies below the published doorbell,
 * whether it rang the doorbell itself or not. No lock is held on return; the
 * completion is delivered by the service.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "agile/agile_service.hpp"
#include "agile/config.hpp"
#include "agile/lock_chain.hpp"
#include "agile/nvme_queue.hpp"
#include "agile/sim.hpp"
#include "agile/ssd_model.hpp"

namespace agile::nvme {

struct IssueRequest {
  Opcode opcode = Opcode::read;
  BlockKey key;
  std::byte* buffer = nullptr;
  /// Completed by the service; may be null.
  std::shared_ptr<service::TransactionBarrier> barrier;
  /// Runs in the service right after the SQE is released.
  std::function<void()> on_complete;
};

struct IssueReceipt {
  std::uint32_t qp = 0;
  std::uint32_t sqe = 0;
  std::uint16_t cid = 0;
};

struct IssuerStats {
  std::uint64_t enqueued = 0;
  std::uint64_t issued = 0;
  std::uint64_t doorbells = 0;
  std::uint64_t full_retries = 0;
  std::uint64_t doorbell_retries = 0;
  std::uint64_t issued_by_other = 0;
};

class Issuer {
 public:
  Issuer(sim::Simulator& sim, TimingConfig timing, lock::LockDetector& detector, service::AgileService& service,
         std::vector<std::vector<QueuePair*>> qps_by_device, std::vector<ssd::SsdDevice*> devices);

  /// Enqueues and drives the doorbell until the command is issued.
  sim::Co<IssueReceipt> submit(std::uint32_t thread_idx, IssueRequest req, lock::LockChain& chain);

  std::uint32_t num_sqs(std::uint32_t dev) const { return static_cast<std::uint32_t>(qps_.at(dev).size()); }
  std::size_t num_devices() const noexcept { return qps_.size(); }
  ssd::SsdDevice& device(std::uint32_t dev) { return *devices_.at(dev); }
  const IssuerStats& stats() const noexcept { return stats_; }

 private:
  sim::Simulator& sim_;
  TimingConfig timing_;
  lock::LockDetector& detector_;
  service::AgileService& service_;
  std::vector<std::vector<QueuePair*>> qps_;
  std::vector<ssd::SsdDevice*> devices_;
  IssuerStats stats_;
};

}  // namespace agile::nvme
