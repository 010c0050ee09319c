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
 * @file gpu_api.hpp
 * @brief Thread-facing API: prefetch, asynchronous read/write with
 * barriers, array-style synchronous access, warp-level coalescing.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "agile/barrier.hpp"
#include "agile/config.hpp"
#include "agile/lock_chain.hpp"
#include "agile/share_table.hpp"
#include "agile/sim.hpp"
#include "agile/software_cache.hpp"

namespace agile::api {

inline constexpr std::uint32_t kWarpSize = 32;

/// Per-thread state passed to every API call.
struct ThreadCtx {
  ThreadCtx(std::uint32_t thread, sim::TaskId task) : thread_idx(thread), chain(task) {}
  std::uint32_t thread_idx;
  lock::LockChain chain;
};

/// One block of user memory plus its transfer barrier.
class AgileBuf {
 public:
  AgileBuf(sim::Simulator& sim, std::uint32_t block_size);

  std::span<std::byte> data() noexcept { return active_->data; }
  std::span<const std::byte> data() const noexcept { return active_->data; }
  service::TransactionBarrier& barrier() noexcept { return *active_->barrier; }
  bool ready() const noexcept { return active_->barrier->done(); }
  /// Currently pointing at another task's registered buffer.
  bool shared() const noexcept { return active_ != own_; }
  /// Holds a share-table reference that must be released.
  bool registered() const noexcept { return registered_; }
  std::optional<BlockKey> bound_key() const noexcept { return active_->bound_key; }

 private:
  friend class AgileCtrl;
  sim::Simulator* sim_;
  std::shared_ptr<share::BufferStorage> own_;
  std::shared_ptr<share::BufferStorage> active_;
  bool registered_ = false;
};

struct CoalesceResult {
  std::vector<BlockKey> unique;
  /// Leader lane of each unique key (lowest participating lane).
  std::vector<std::uint32_t> leaders;
  /// Index into `unique` per lane; -1 for lanes that did not participate.
  std::vector<int> group;
};

/// Collapses duplicate requests across lanes.
CoalesceResult warp_coalesce(std::span<const std::optional<BlockKey>> lanes);

/// Lockstep rendezvous of the lanes of one user warp.
class UserWarp {
 public:
  UserWarp(sim::Simulator& sim, std::uint32_t warp_id, std::uint32_t lanes = kWarpSize);

  std::uint32_t id() const noexcept { return id_; }
  std::uint32_t lanes() const noexcept { return lanes_; }

  struct Assignment {
    int group = -1;
    bool leader = false;
  };
  /// Every lane must call this (with nullopt when not participating).
  sim::Co<Assignment> rendezvous(std::uint32_t lane, std::optional<BlockKey> key);
  const CoalesceResult& result() const noexcept { return result_; }

  /// Leader-to-lane broadcast slot for group `g` of the current round.
  struct Slot {
    explicit Slot(sim::Simulator& sim) : ready(sim) {}
    service::TransactionBarrier ready;
    std::vector<std::byte> data;
  };
  Slot& slot(int g) { return *slots_.at(static_cast<std::size_t>(g)); }

 private:
  sim::Simulator& sim_;
  std::uint32_t id_;
  std::uint32_t lanes_;
  sim::Barrier arrive_;
  std::array<std::optional<BlockKey>, kWarpSize> requests_{};
  CoalesceResult result_;
  std::uint64_t computed_gen_ = 0;
  std::vector<std::unique_ptr<Slot>> slots_;
};

struct ApiStats {
  std::uint64_t prefetches = 0;
  std::uint64_t prefetch_accesses = 0;
  std::uint64_t reads = 0;
  std::uint64_t shared_reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t array_gets = 0;
  std::uint64_t waits = 0;
  std::uint64_t waits_holding_locks = 0;
};

class AgileCtrl {
 public:
  AgileCtrl(sim::Simulator& sim, cache::SoftwareCache& cache, share::ShareTable* share, nvme::Issuer& issuer,
            TimingConfig timing);

  std::uint32_t block_size() const noexcept { return cache_.block_size(); }
  AgileBuf make_buffer() { return AgileBuf(sim_, block_size()); }

  /// Starts bringing a block into the cache without waiting. With a warp,
  /// only one lane per distinct block reaches the cache.
  sim::Co<void> prefetch(ThreadCtx& ctx, BlockKey key, UserWarp* warp = nullptr, std::uint32_t lane = 0);

  /// Fills `buf` with the block; wait() blocks until the data is there.
  sim::Co<void> async_read(ThreadCtx& ctx, BlockKey key, AgileBuf& buf);
  sim::Co<void> wait(ThreadCtx& ctx, AgileBuf& buf);

  /// Copies `buf` into the cache and issues the device write. `buf` may be
  /// reused as soon as this returns; the result completes on durability.
  sim::Co<std::shared_ptr<service::TransactionBarrier>> async_write(ThreadCtx& ctx, BlockKey key, AgileBuf& buf);

  /// Records an in-place update of a shared buffer.
  void mark_modified(ThreadCtx& ctx, AgileBuf& buf);
  /// Drops the buffer's share-table reference; the last holder of a
  /// modified buffer hands its bytes to the cache.
  sim::Co<void> release(ThreadCtx& ctx, AgileBuf& buf);

  /// Element `idx` (little-endian, `elem_size` bytes) of device `dev` viewed
  /// as a flat array.
  sim::Co<std::uint64_t> array_get(ThreadCtx& ctx, std::uint32_t dev, std::uint64_t idx, std::uint32_t elem_size);
  /// Same, coalesced across the lanes of `warp`.
  sim::Co<std::uint64_t> warp_array_get(ThreadCtx& ctx, UserWarp& warp, std::uint32_t lane, std::uint32_t dev,
                                        std::uint64_t idx, std::uint32_t elem_size);

  /// Reads a whole block through the cache into `dst`, waiting for it.
  sim::Co<void> read_block_sync(ThreadCtx& ctx, BlockKey key, std::span<std::byte> dst);

  sim::Co<void> flush(ThreadCtx& ctx);

  const ApiStats& stats() const noexcept { return stats_; }
  cache::SoftwareCache& cache() noexcept { return cache_; }
  share::ShareTable* share_table() noexcept { return share_; }

 private:
  struct Element {
    BlockKey key;
    std::uint32_t offset;
  };
  Element locate(std::uint32_t dev, std::uint64_t idx, std::uint32_t elem_size) const;
  void check_key(const BlockKey& key) const;
  void note_wait(ThreadCtx& ctx);

  sim::Simulator& sim_;
  cache::SoftwareCache& cache_;
  share::ShareTable* share_;
  nvme::Issuer& issuer_;
  TimingConfig timing_;
  ApiStats stats_;
};

std::uint64_t load_le(const std::byte* p, std::uint32_t size) noexcept;

}  // namespace agile::api
