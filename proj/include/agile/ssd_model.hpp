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
 * @file ssd_model.hpp
 * @brief Simulated NVMe SSD.
 *
 * The device has `parallelism` channels, each serving one command at a time.
 * Fetched commands wait FIFO for a free channel. A read copies the block to
 * its destination when it completes; a write samples its source when it
 * starts. Completions that find the CQ full queue inside the device and are
 * posted as the host frees CQ entries.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "agile/config.hpp"
#include "agile/nvme_queue.hpp"
#include "agile/sim.hpp"

namespace agile::ssd {

class BlockStore {
 public:
  virtual ~BlockStore() = default;
  virtual void read(std::uint64_t blk, std::span<std::byte> out) = 0;
  virtual void write(std::uint64_t blk, std::span<const std::byte> in) = 0;
};

/// Sparse in-memory store; unwritten blocks read as zeros.
class MemoryBlockStore final : public BlockStore {
 public:
  explicit MemoryBlockStore(std::uint32_t block_size) : block_size_(block_size) {}
  void read(std::uint64_t blk, std::span<std::byte> out) override;
  void write(std::uint64_t blk, std::span<const std::byte> in) override;
  std::size_t resident_blocks() const noexcept { return blocks_.size(); }

 private:
  std::uint32_t block_size_;
  std::unordered_map<std::uint64_t, std::vector<std::byte>> blocks_;
};

/// Raw block image: block b lives at byte offset b * block_size.
class FileBlockStore final : public BlockStore {
 public:
  FileBlockStore(const std::string& path, std::uint32_t block_size);
  void read(std::uint64_t blk, std::span<std::byte> out) override;
  void write(std::uint64_t blk, std::span<const std::byte> in) override;

 private:
  std::uint32_t block_size_;
  std::fstream file_;
};

struct SsdStats {
  std::uint64_t fetched = 0;
  std::uint64_t completed = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t overflowed = 0;
  std::uint64_t bytes = 0;
};

class SsdDevice {
 public:
  SsdDevice(sim::Simulator& sim, std::uint32_t dev_idx, DeviceConfig cfg);

  std::uint32_t index() const noexcept { return idx_; }
  const DeviceConfig& config() const noexcept { return cfg_; }
  std::uint32_t block_size() const noexcept { return cfg_.block_size; }
  std::uint64_t num_blocks() const noexcept { return cfg_.blocks; }
  sim::TaskId engine_task() const noexcept { return task_; }

  void bind(nvme::QueuePair& qp);

  /// Host published a new SQ tail (wrapped to the ring depth).
  void on_sq_doorbell(nvme::QueuePair& qp, std::uint32_t wrapped_tail);
  /// Host published a new CQ head (wrapped).
  void on_cq_doorbell(nvme::QueuePair& qp, std::uint32_t wrapped_head);

  /// Direct store access; throws OutOfRange past the end of the device.
  std::vector<std::byte> read_block(std::uint64_t blk);
  void write_block(std::uint64_t blk, std::span<const std::byte> data);

  const SsdStats& stats() const noexcept { return stats_; }
  std::uint32_t busy_channels() const noexcept { return busy_; }
  std::size_t queued() const noexcept { return pending_.size(); }
  std::size_t overflow_depth(const nvme::QueuePair& qp) const;

  /// Steady-state ceiling in bytes per second for reads or writes.
  double saturated_bytes_per_s(nvme::Opcode op) const;

 private:
  struct Job {
    nvme::QueuePair* qp;
    nvme::NvmeCommand cmd;
    sim::SimTime fetched_at;
  };
  struct Overflow {
    std::uint16_t cid;
  };

  void check_range(std::uint64_t blk) const;
  void fetch(nvme::QueuePair& qp, std::uint64_t new_tail);
  void dispatch();
  void finish(Job job);
  void post(nvme::QueuePair& qp, std::uint16_t cid);
  sim::SimTime service_time(nvme::Opcode op);

  sim::Simulator& sim_;
  std::uint32_t idx_;
  DeviceConfig cfg_;
  sim::TaskId task_;
  std::unique_ptr<BlockStore> store_;
  std::mt19937_64 rng_;
  std::unordered_map<std::uint32_t, std::uint64_t> fetch_pos_;
  std::unordered_map<std::uint32_t, std::deque<Overflow>> overflow_;
  std::deque<Job> pending_;
  std::uint32_t busy_ = 0;
  SsdStats stats_;
};

}  // namespace agile::ssd
