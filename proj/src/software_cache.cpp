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
#include "agile/software_cache.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace agile::cache {

const char* to_string(LineState s) {
  switch (s) {
    case LineState::invalid: return "INVALID";
    case LineState::busy: return "BUSY";
    case LineState::ready: return "READY";
    case LineState::modified: return "MODIFIED";
  }
  return "?";
}

const char* to_string(AccessKind k) {
  switch (k) {
    case AccessKind::hit: return "HIT";
    case AccessKind::filling: return "FILLING";
    case AccessKind::miss_fill_started: return "MISS_FILL_STARTED";
  }
  return "?";
}

std::optional<std::uint32_t> CachePolicy::find_another(const BlockKey&, std::uint32_t rejected,
                                                       const std::vector<CacheLine>& lines) {
  const auto n = static_cast<std::uint32_t>(lines.size());
  for (std::uint32_t step = 1; step < n; ++step) {
    const std::uint32_t i = (rejected + step) % n;
    if (lines[i].state != LineState::busy) return i;
  }
  return std::nullopt;
}

ClockPolicy::ClockPolicy(std::size_t lines, BusyEvictionChoice choice) : CachePolicy(choice), ref_(lines, 0) {}

std::optional<std::uint32_t> ClockPolicy::map(const BlockKey&, const std::vector<CacheLine>& lines) {
  std::lock_guard guard(mu_);
  const auto n = static_cast<std::uint32_t>(lines.size());
  for (std::uint32_t step = 0; step < 2 * n; ++step) {
    const std::uint32_t i = hand_;
    hand_ = (hand_ + 1) % n;
    if (lines[i].state == LineState::busy) continue;
    if (ref_[i] != 0) {
      ref_[i] = 0;
      continue;
    }
    return i;
  }
  return std::nullopt;
}

void ClockPolicy::on_hit(std::uint32_t line) {
  std::lock_guard guard(mu_);
  ref_.at(line) = 1;
}

void ClockPolicy::on_miss(std::uint32_t line) {
  std::lock_guard guard(mu_);
  ref_.at(line) = 1;
}

std::optional<std::uint32_t> DirectMappedPolicy::map(const BlockKey& key, const std::vector<CacheLine>& lines) {
  return static_cast<std::uint32_t>(BlockKeyHash{}(key) % lines.size());
}

SoftwareCache::SoftwareCache(sim::Simulator& sim, std::uint64_t num_lines, std::uint32_t block_size,
                             nvme::Issuer& issuer, lock::LockDetector& detector,
                             std::unique_ptr<CachePolicy> policy)
    : sim_(sim),
      block_size_(block_size),
      issuer_(issuer),
      detector_(detector),
      policy_(std::move(policy)),
      lines_(num_lines),
      line_freed_(sim) {
  if (num_lines == 0) throw ConfigError("cache must have at least one line");
  for (std::uint32_t i = 0; i < lines_.size(); ++i) {
    auto& l = lines_[i];
    l.idx = i;
    l.data.assign(block_size, std::byte{0});
    l.lock = &detector.create_lock("line" + std::to_string(i));
    l.settled = std::make_unique<sim::WaitQueue>(sim);
  }
}

std::optional<std::uint32_t> SoftwareCache::lookup(const BlockKey& key) const {
  auto it = directory_.find(key);
  if (it == directory_.end()) return std::nullopt;
  return it->second;
}

void SoftwareCache::lock_line(CacheLine& l, lock::LockChain& chain) {
  for (lock::LockId held : chain.held()) {
    if (detector_.label(held).starts_with("line")) {
      throw ProtocolViolation("task " + std::to_string(chain.task()) + " would hold two cache-line locks");
    }
  }
  if (!detector_.acquire(*l.lock, chain).acquired()) {
    throw ProtocolViolation("cache line " + std::to_string(l.idx) + " lock held across a suspension");
  }
}

void SoftwareCache::unlock_line(CacheLine& l, lock::LockChain& chain) { detector_.release(*l.lock, chain); }

void SoftwareCache::set_state(CacheLine& l, LineState to) {
  const LineState from = l.state;
  l.state = to;
  if (sim_.trace().enabled()) {
    const BlockKey k = l.tag.value_or(BlockKey{});
    sim_.trace().emit("cache", "state",
                      {{"line", l.idx}, {"from", static_cast<std::int64_t>(from)},
                       {"to", static_cast<std::int64_t>(to)}, {"dev", l.tag ? static_cast<std::int64_t>(k.dev) : -1},
                       {"blk", l.tag ? static_cast<std::int64_t>(k.blk) : -1}},
                      l.writeback ? "writeback" : std::string_view{});
  }
}

void SoftwareCache::command_done(std::uint32_t idx) {
  CacheLine& l = lines_[idx];
  auto waiters = std::move(l.waiters);
  l.waiters.clear();
  for (auto& w : waiters) w(l.data.data());
  if (l.writeback) {
    const BlockKey old = *l.tag;
    set_state(l, LineState::invalid);
    l.writeback = false;
    directory_.erase(old);
    l.tag.reset();
  } else {
    set_state(l, LineState::ready);
  }
  l.settled->notify_all();
  line_freed_.notify_all();
}

sim::Co<void> SoftwareCache::wait_settled(std::uint32_t idx) {
  CacheLine& l = lines_.at(idx);
  while (l.state == LineState::busy) co_await l.settled->wait();
}

sim::Co<void> SoftwareCache::start_writeback(CacheLine& l, bool evicting, std::uint32_t thread_idx,
                                             lock::LockChain& chain) {
  if (evicting) ++stats_.writebacks;
  nvme::IssueRequest req;
  req.opcode = nvme::Opcode::write;
  req.key = *l.tag;
  req.buffer = l.data.data();
  req.on_complete = [this, idx = l.idx] { command_done(idx); };
  co_await issuer_.submit(thread_idx, std::move(req), chain);
}

sim::Co<AccessResult> SoftwareCache::access(BlockKey key, std::uint32_t thread_idx, lock::LockChain& chain,
                                            Waiter waiter) {
  co_return co_await resolve(key, thread_idx, chain, Intent::read, std::move(waiter), nullptr, nullptr);
}

sim::Co<std::shared_ptr<service::TransactionBarrier>> SoftwareCache::write_block(BlockKey key, const std::byte* src,
                                                                                 std::uint32_t thread_idx,
                                                                                 lock::LockChain& chain) {
  auto durability = std::make_shared<service::TransactionBarrier>(sim_, sim_.current_task());
  co_await resolve(key, thread_idx, chain, Intent::write, {}, src, durability);
  co_return durability;
}

sim::Co<AccessResult> SoftwareCache::resolve(BlockKey key, std::uint32_t thread_idx, lock::LockChain& chain,
                                             Intent intent, Waiter waiter, const std::byte* src,
                                             std::shared_ptr<service::TransactionBarrier> durability) {
  ++stats_.accesses;
  for (;;) {
    if (auto found = lookup(key)) {
      CacheLine& l = lines_[*found];
      lock_line(l, chain);
      if (l.state == LineState::ready || l.state == LineState::modified) {
        policy_->on_hit(l.idx);
        if (intent == Intent::read) {
          unlock_line(l, chain);
          ++stats_.hits;
          if (sim_.trace().enabled()) {
            sim_.trace().emit("cache", "access",
                              {{"kind", 0}, {"line", l.idx}, {"dev", key.dev}, {"blk", static_cast<std::int64_t>(key.blk)}});
          }
          co_return AccessResult{AccessKind::hit, l.idx};
        }
        std::memcpy(l.data.data(), src, block_size_);
        if (l.state == LineState::ready) set_state(l, LineState::modified);
        set_state(l, LineState::busy);
        unlock_line(l, chain);
        ++stats_.eager_writes;
        nvme::IssueRequest req;
        req.opcode = nvme::Opcode::write;
        req.key = key;
        req.buffer = l.data.data();
        req.barrier = durability;
        req.on_complete = [this, idx = l.idx] { command_done(idx); };
        co_await issuer_.submit(thread_idx, std::move(req), chain);
        co_return AccessResult{AccessKind::hit, l.idx};
      }
      // BUSY on this tag: a fill, an eager write or a write-back is in flight.
      if (intent == Intent::read) {
        if (waiter) l.waiters.push_back(std::move(waiter));
        unlock_line(l, chain);
        ++stats_.joined;
        if (sim_.trace().enabled()) {
          sim_.trace().emit("cache", "access",
                            {{"kind", 1}, {"line", l.idx}, {"dev", key.dev}, {"blk", static_cast<std::int64_t>(key.blk)}});
        }
        co_return AccessResult{AccessKind::filling, l.idx};
      }
      unlock_line(l, chain);
      co_await wait_settled(l.idx);
      continue;
    }

    // Miss: pick a victim.
    std::optional<std::uint32_t> victim = policy_->map(key, lines_);
    while (victim && lines_[*victim].state == LineState::busy) {
      ++stats_.deferred;
      if (sim_.trace().enabled()) sim_.trace().emit("cache", "evict_deferred", {{"line", *victim}});
      if (policy_->busy_choice() == BusyEvictionChoice::wait) break;
      victim = policy_->find_another(key, *victim, lines_);
    }
    if (!victim) {
      co_await line_freed_.wait();
      continue;
    }
    CacheLine& v = lines_[*victim];
    if (v.state == LineState::busy) {
      co_await wait_settled(v.idx);
      continue;
    }
    lock_line(v, chain);
    if (v.state == LineState::modified) {
      v.writeback = true;
      set_state(v, LineState::busy);
      unlock_line(v, chain);
      co_await start_writeback(v, true, thread_idx, chain);
      co_await wait_settled(v.idx);
      continue;
    }
    if (v.state == LineState::ready) {
      directory_.erase(*v.tag);
      set_state(v, LineState::invalid);
      v.tag.reset();
      ++stats_.resets;
    }
    v.tag = key;
    directory_[key] = v.idx;
    set_state(v, LineState::busy);
    policy_->on_miss(v.idx);
    nvme::IssueRequest req;
    req.key = key;
    req.buffer = v.data.data();
    req.on_complete = [this, idx = v.idx] { command_done(idx); };
    if (intent == Intent::read) {
      if (waiter) v.waiters.push_back(std::move(waiter));
      req.opcode = nvme::Opcode::read;
      ++stats_.fills;
    } else {
      std::memcpy(v.data.data(), src, block_size_);
      req.opcode = nvme::Opcode::write;
      req.barrier = durability;
      ++stats_.eager_writes;
    }
    unlock_line(v, chain);
    if (sim_.trace().enabled()) {
      sim_.trace().emit("cache", "access",
                        {{"kind", 2}, {"line", v.idx}, {"dev", key.dev}, {"blk", static_cast<std::int64_t>(key.blk)},
                         {"op", static_cast<std::int64_t>(req.opcode)}});
    }
    co_await issuer_.submit(thread_idx, std::move(req), chain);
    co_return AccessResult{AccessKind::miss_fill_started, v.idx};
  }
}

sim::Co<void> SoftwareCache::propagate(BlockKey key, const std::byte* src, std::uint32_t thread_idx,
                                       lock::LockChain& chain) {
  ++stats_.propagations;
  for (;;) {
    auto found = lookup(key);
    if (!found) break;
    CacheLine& l = lines_[*found];
    if (l.state == LineState::busy) {
      co_await wait_settled(l.idx);
      continue;
    }
    lock_line(l, chain);
    std::memcpy(l.data.data(), src, block_size_);
    if (l.state == LineState::ready) set_state(l, LineState::modified);
    unlock_line(l, chain);
    co_return;
  }
  co_await write_block(key, src, thread_idx, chain);
}

void SoftwareCache::mark_modified(std::uint32_t idx, lock::LockChain& chain) {
  CacheLine& l = lines_.at(idx);
  if (l.state != LineState::ready && l.state != LineState::modified) {
    throw IllegalState("mark_modified on line " + std::to_string(idx) + " in state " + to_string(l.state));
  }
  lock_line(l, chain);
  if (l.state == LineState::ready) set_state(l, LineState::modified);
  unlock_line(l, chain);
}

sim::Co<EvictResult> SoftwareCache::evict(std::uint32_t idx, std::uint32_t thread_idx, lock::LockChain& chain) {
  CacheLine& l = lines_.at(idx);
  switch (l.state) {
    case LineState::busy:
      ++stats_.deferred;
      co_return EvictResult::deferred;
    case LineState::invalid:
      co_return EvictResult::reset;
    case LineState::ready:
      lock_line(l, chain);
      directory_.erase(*l.tag);
      set_state(l, LineState::invalid);
      l.tag.reset();
      ++stats_.resets;
      unlock_line(l, chain);
      line_freed_.notify_all();
      co_return EvictResult::reset;
    case LineState::modified:
      lock_line(l, chain);
      l.writeback = true;
      set_state(l, LineState::busy);
      unlock_line(l, chain);
      co_await start_writeback(l, true, thread_idx, chain);
      co_return EvictResult::writeback_started;
  }
  co_return EvictResult::deferred;
}

sim::Co<void> SoftwareCache::flush(std::uint32_t thread_idx, lock::LockChain& chain) {
  for (auto& l : lines_) {
    if (l.state != LineState::modified) continue;
    lock_line(l, chain);
    set_state(l, LineState::busy);
    unlock_line(l, chain);
    co_await start_writeback(l, false, thread_idx, chain);
  }
  for (auto& l : lines_) co_await wait_settled(l.idx);
}

}  // namespace agile::cache
