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
 * @file share_table.hpp
 * @brief Ownership table for user buffers holding device blocks.
 *
 * The first task to read a block into its own buffer registers that buffer
 * (Exclusive). Later readers of the same block get the registered buffer
 * instead of a private copy (Shared, refcount + 1). A write through the
 * shared buffer marks it Modified; the last release hands the bytes back to
 * the software cache. Open addressing with linear probing over a
 * power-of-two bucket array; each key is guarded by its home bucket's lock.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "agile/barrier.hpp"
#include "agile/lock_chain.hpp"
#include "agile/types.hpp"

namespace agile::share {

/// Storage behind an AgileBuf; shared between tasks through the table.
struct BufferStorage {
  std::vector<std::byte> data;
  std::shared_ptr<service::TransactionBarrier> barrier;
  std::optional<BlockKey> bound_key;
};

enum class ShareState : std::uint8_t { exclusive, shared, modified };

const char* to_string(ShareState s);

struct ShareEntry {
  BlockKey key;
  std::shared_ptr<BufferStorage> buf;
  sim::TaskId owner = sim::kNoTask;
  ShareState state = ShareState::exclusive;
  std::uint32_t refcount = 0;
  /// Bumped on every modification; guards removal after propagation.
  std::uint64_t version = 0;
  std::vector<sim::TaskId> holders;
  /// Latest version handed to a propagation, and how many are still running.
  std::uint64_t propagated_version = 0;
  std::uint32_t propagations = 0;
};

struct LookupResult {
  std::shared_ptr<BufferStorage> buf;
  bool registered = false;
  /// Table had no room; the caller proceeds without sharing.
  bool overflow = false;
};

struct ReleaseResult {
  std::uint32_t remaining = 0;
  /// Refcount hit zero on a Modified entry: the caller must propagate
  /// `buf` into the cache and then call finish_release().
  bool needs_propagation = false;
  bool removed = false;
  /// Last releaser was not the original owner.
  bool duty_transferred = false;
  std::shared_ptr<BufferStorage> buf;
  std::uint64_t version = 0;
};

struct ShareStats {
  std::uint64_t registrations = 0;
  std::uint64_t shares = 0;
  std::uint64_t releases = 0;
  std::uint64_t propagations = 0;
  std::uint64_t transfers = 0;
  std::uint64_t overflows = 0;
};

class ShareTable {
 public:
  ShareTable(std::uint32_t buckets, lock::LockDetector& detector);

  std::uint32_t buckets() const noexcept { return static_cast<std::uint32_t>(slots_.size()); }
  std::size_t size() const noexcept { return live_; }

  LookupResult lookup_or_register(const BlockKey& key, std::shared_ptr<BufferStorage> mine, sim::TaskId task,
                                  lock::LockChain& chain);
  /// Throws NotRegistered if the key is absent or `task` is not a holder.
  void mark_buffer_modified(const BlockKey& key, sim::TaskId task, lock::LockChain& chain);
  /// Throws NotRegistered for an absent key, DoubleRelease if `task` holds
  /// no reference.
  ReleaseResult release(const BlockKey& key, sim::TaskId task, lock::LockChain& chain);
  /// Ends one propagation. The entry goes away once nobody holds it and its
  /// latest version has reached the cache. Returns true if removed.
  bool finish_release(const BlockKey& key, std::uint64_t version, lock::LockChain& chain);

  const ShareEntry* find(const BlockKey& key) const;
  const ShareStats& stats() const noexcept { return stats_; }

 private:
  struct Slot {
    enum class Kind : std::uint8_t { empty, live, tombstone } kind = Kind::empty;
    ShareEntry entry;
  };
  std::uint32_t home(const BlockKey& key) const noexcept;
  std::optional<std::uint32_t> locate(const BlockKey& key) const;
  void lock_bucket(std::uint32_t b, lock::LockChain& chain);
  void unlock_bucket(std::uint32_t b, lock::LockChain& chain);

  std::vector<Slot> slots_;
  std::vector<lock::AgileLock*> bucket_locks_;
  lock::LockDetector& detector_;
  std::size_t live_ = 0;
  ShareStats stats_;
};

}  // namespace agile::share
