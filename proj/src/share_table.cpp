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
#include "agile/share_table.hpp"

#include <algorithm>
#include <string>

#include "agile/nvme_queue.hpp"

namespace agile::share {

const char* to_string(ShareState s) {
  switch (s) {
    case ShareState::exclusive: return "Exclusive";
    case ShareState::shared: return "Shared";
    case ShareState::modified: return "Modified";
  }
  return "?";
}

ShareTable::ShareTable(std::uint32_t buckets, lock::LockDetector& detector)
    : slots_(buckets), detector_(detector) {
  if (!nvme::is_power_of_two(buckets)) throw ConfigError("share_table.buckets must be a power of two");
  bucket_locks_.reserve(buckets);
  for (std::uint32_t b = 0; b < buckets; ++b) {
    bucket_locks_.push_back(&detector.create_lock("bucket" + std::to_string(b)));
  }
}

std::uint32_t ShareTable::home(const BlockKey& key) const noexcept {
  return static_cast<std::uint32_t>(BlockKeyHash{}(key) & (slots_.size() - 1));
}

std::optional<std::uint32_t> ShareTable::locate(const BlockKey& key) const {
  const auto n = static_cast<std::uint32_t>(slots_.size());
  std::uint32_t i = home(key);
  for (std::uint32_t probe = 0; probe < n; ++probe, i = (i + 1) & (n - 1)) {
    const Slot& s = slots_[i];
    if (s.kind == Slot::Kind::empty) return std::nullopt;
    if (s.kind == Slot::Kind::live && s.entry.key == key) return i;
  }
  return std::nullopt;
}

const ShareEntry* ShareTable::find(const BlockKey& key) const {
  auto i = locate(key);
  return i ? &slots_[*i].entry : nullptr;
}

void ShareTable::lock_bucket(std::uint32_t b, lock::LockChain& chain) {
  if (!detector_.acquire(*bucket_locks_[b], chain).acquired()) {
    throw ProtocolViolation("share bucket " + std::to_string(b) + " lock held across a suspension");
  }
}

void ShareTable::unlock_bucket(std::uint32_t b, lock::LockChain& chain) { detector_.release(*bucket_locks_[b], chain); }

LookupResult ShareTable::lookup_or_register(const BlockKey& key, std::shared_ptr<BufferStorage> mine,
                                            sim::TaskId task, lock::LockChain& chain) {
  const std::uint32_t b = home(key);
  lock_bucket(b, chain);
  LookupResult out;
  if (auto i = locate(key)) {
    ShareEntry& e = slots_[*i].entry;
    ++e.refcount;
    e.holders.push_back(task);
    if (e.state == ShareState::exclusive) e.state = ShareState::shared;
    ++stats_.shares;
    out.buf = e.buf;
  } else {
    const auto n = static_cast<std::uint32_t>(slots_.size());
    std::optional<std::uint32_t> free;
    for (std::uint32_t probe = 0, j = b; probe < n; ++probe, j = (j + 1) & (n - 1)) {
      if (slots_[j].kind != Slot::Kind::live) {
        free = j;
        break;
      }
    }
    if (!free) {
      ++stats_.overflows;
      out.buf = std::move(mine);
      out.overflow = true;
    } else {
      Slot& s = slots_[*free];
      s.kind = Slot::Kind::live;
      s.entry = ShareEntry{key, mine, task, ShareState::exclusive, 1, 0, {task}};
      ++live_;
      ++stats_.registrations;
      out.buf = std::move(mine);
      out.registered = true;
    }
  }
  unlock_bucket(b, chain);
  return out;
}

void ShareTable::mark_buffer_modified(const BlockKey& key, sim::TaskId task, lock::LockChain& chain) {
  const std::uint32_t b = home(key);
  lock_bucket(b, chain);
  auto i = locate(key);
  if (!i || std::find(slots_[*i].entry.holders.begin(), slots_[*i].entry.holders.end(), task) ==
                slots_[*i].entry.holders.end()) {
    unlock_bucket(b, chain);
    throw NotRegistered("block " + to_string(key) + " not shared by task " + std::to_string(task));
  }
  ShareEntry& e = slots_[*i].entry;
  e.state = ShareState::modified;
  ++e.version;
  unlock_bucket(b, chain);
}

ReleaseResult ShareTable::release(const BlockKey& key, sim::TaskId task, lock::LockChain& chain) {
  const std::uint32_t b = home(key);
  lock_bucket(b, chain);
  auto i = locate(key);
  if (!i) {
    unlock_bucket(b, chain);
    throw NotRegistered("block " + to_string(key) + " has no share entry");
  }
  ShareEntry& e = slots_[*i].entry;
  auto h = std::find(e.holders.begin(), e.holders.end(), task);
  if (h == e.holders.end()) {
    unlock_bucket(b, chain);
    throw DoubleRelease("task " + std::to_string(task) + " holds no reference to " + to_string(key));
  }
  e.holders.erase(h);
  --e.refcount;
  ++stats_.releases;
  ReleaseResult r;
  r.remaining = e.refcount;
  r.buf = e.buf;
  r.version = e.version;
  if (e.refcount == 0) {
    const bool fresh = e.state == ShareState::modified && e.version != e.propagated_version;
    r.duty_transferred = fresh && task != e.owner;
    if (r.duty_transferred) ++stats_.transfers;
    if (fresh) {
      r.needs_propagation = true;
      e.propagated_version = e.version;
      ++e.propagations;
      ++stats_.propagations;
    } else if (e.propagations > 0) {
      // Already on its way to the cache; the running propagation removes it.
    } else {
      slots_[*i].kind = Slot::Kind::tombstone;
      slots_[*i].entry = ShareEntry{};
      --live_;
      r.removed = true;
    }
  }
  unlock_bucket(b, chain);
  return r;
}

bool ShareTable::finish_release(const BlockKey& key, std::uint64_t version, lock::LockChain& chain) {
  const std::uint32_t b = home(key);
  lock_bucket(b, chain);
  bool removed = false;
  if (auto i = locate(key)) {
    ShareEntry& e = slots_[*i].entry;
    if (e.propagations == 0 || version > e.propagated_version) {
      unlock_bucket(b, chain);
      throw ProtocolViolation("finish_release of " + to_string(key) + " with no matching propagation");
    }
    --e.propagations;
    if (e.refcount == 0 && e.propagations == 0 && e.propagated_version == e.version) {
      slots_[*i].kind = Slot::Kind::tombstone;
      slots_[*i].entry = ShareEntry{};
      --live_;
      removed = true;
    }
  }
  unlock_bucket(b, chain);
  return removed;
}

}  // namespace agile::share
