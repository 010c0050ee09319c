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
#include "agile/gpu_api.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace agile::api {

namespace {

std::shared_ptr<share::BufferStorage> make_storage(sim::Simulator& sim, std::uint32_t block_size) {
  auto s = std::make_shared<share::BufferStorage>();
  s->data.assign(block_size, std::byte{0});
  s->barrier = std::make_shared<service::TransactionBarrier>(sim);
  return s;
}

}  // namespace

std::uint64_t load_le(const std::byte* p, std::uint32_t size) noexcept {
  std::uint64_t v = 0;
  for (std::uint32_t i = 0; i < size; ++i) v |= std::uint64_t{std::to_integer<std::uint8_t>(p[i])} << (8 * i);
  return v;
}

AgileBuf::AgileBuf(sim::Simulator& sim, std::uint32_t block_size)
    : sim_(&sim), own_(make_storage(sim, block_size)), active_(own_) {}

CoalesceResult warp_coalesce(std::span<const std::optional<BlockKey>> lanes) {
  CoalesceResult r;
  r.group.assign(lanes.size(), -1);
  for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
    if (!lanes[lane]) continue;
    auto it = std::find(r.unique.begin(), r.unique.end(), *lanes[lane]);
    if (it == r.unique.end()) {
      r.group[lane] = static_cast<int>(r.unique.size());
      r.unique.push_back(*lanes[lane]);
      r.leaders.push_back(static_cast<std::uint32_t>(lane));
    } else {
      r.group[lane] = static_cast<int>(it - r.unique.begin());
    }
  }
  return r;
}

UserWarp::UserWarp(sim::Simulator& sim, std::uint32_t warp_id, std::uint32_t lanes)
    : sim_(sim), id_(warp_id), lanes_(lanes), arrive_(sim, lanes) {
  if (lanes == 0 || lanes > kWarpSize) throw ConfigError("a warp has 1..32 lanes");
}

sim::Co<UserWarp::Assignment> UserWarp::rendezvous(std::uint32_t lane, std::optional<BlockKey> key) {
  requests_.at(lane) = key;
  co_await arrive_.arrive_and_wait();
  if (computed_gen_ != arrive_.generation()) {
    // First lane through the barrier publishes the round's grouping.
    computed_gen_ = arrive_.generation();
    result_ = warp_coalesce(std::span<const std::optional<BlockKey>>(requests_.data(), lanes_));
    while (slots_.size() < result_.unique.size()) slots_.push_back(std::make_unique<Slot>(sim_));
    for (std::size_t g = 0; g < result_.unique.size(); ++g) slots_[g]->ready.rearm(sim::kNoTask);
  }
  Assignment a;
  a.group = result_.group.at(lane);
  a.leader = a.group >= 0 && result_.leaders[static_cast<std::size_t>(a.group)] == lane;
  co_return a;
}

AgileCtrl::AgileCtrl(sim::Simulator& sim, cache::SoftwareCache& cache, share::ShareTable* share,
                     nvme::Issuer& issuer, TimingConfig timing)
    : sim_(sim), cache_(cache), share_(share), issuer_(issuer), timing_(timing) {}

void AgileCtrl::check_key(const BlockKey& key) const {
  if (key.dev >= issuer_.num_devices()) throw OutOfRange("no device " + std::to_string(key.dev));
  if (key.blk >= issuer_.device(key.dev).num_blocks()) {
    throw OutOfRange("block " + std::to_string(key.blk) + " beyond device " + std::to_string(key.dev));
  }
}

void AgileCtrl::note_wait(ThreadCtx& ctx) {
  ++stats_.waits;
  if (!ctx.chain.empty()) {
    ++stats_.waits_holding_locks;
    if (sim_.trace().enabled()) {
      sim_.trace().emit("api", "wait_holding_locks", {{"held", static_cast<std::int64_t>(ctx.chain.size())}});
    }
  }
}

sim::Co<void> AgileCtrl::prefetch(ThreadCtx& ctx, BlockKey key, UserWarp* warp, std::uint32_t lane) {
  check_key(key);
  ++stats_.prefetches;
  if (warp != nullptr) {
    auto a = co_await warp->rendezvous(lane, key);
    if (!a.leader) co_return;
  }
  ++stats_.prefetch_accesses;
  co_await sim_.sleep(timing_.api_overhead_ns);
  co_await cache_.access(key, ctx.thread_idx, ctx.chain);
}

sim::Co<void> AgileCtrl::async_read(ThreadCtx& ctx, BlockKey key, AgileBuf& buf) {
  check_key(key);
  if (buf.shared()) {
    if (buf.active_->bound_key == key) co_return;
    throw IllegalState("buffer still shares block " + to_string(*buf.active_->bound_key) + "; release it first");
  }
  if (!buf.own_->barrier->done()) {
    throw BufferBusy("buffer reused while its read of " + to_string(buf.own_->bound_key.value_or(BlockKey{})) +
                     " is pending");
  }
  if (buf.registered_) throw IllegalState("buffer still registered for sharing; release it first");
  ++stats_.reads;
  co_await sim_.sleep(timing_.api_overhead_ns);

  if (share_ != nullptr) {
    auto r = share_->lookup_or_register(key, buf.own_, sim_.current_task(), ctx.chain);
    if (!r.overflow) buf.registered_ = true;
    if (!r.registered && !r.overflow) {
      buf.active_ = r.buf;
      ++stats_.shared_reads;
      if (sim_.trace().enabled()) {
        sim_.trace().emit("share", "join", {{"dev", key.dev}, {"blk", static_cast<std::int64_t>(key.blk)}});
      }
      co_return;
    }
  }

  auto storage = buf.own_;
  storage->barrier->rearm(sim_.current_task());
  storage->bound_key = key;
  auto fill = [storage, bs = block_size()](const std::byte* d) {
    std::memcpy(storage->data.data(), d, bs);
    storage->barrier->complete();
  };
  auto res = co_await cache_.access(key, ctx.thread_idx, ctx.chain, fill);
  if (res.kind == cache::AccessKind::hit) {
    co_await sim_.sleep(timing_.cache_copy_ns);
    const auto& line = cache_.line(res.line);
    if (line.tag == key && line.state != cache::LineState::busy && line.state != cache::LineState::invalid) {
      fill(line.data.data());
    } else {
      // Line changed hands during the copy; start over through the cache.
      storage->barrier->complete();
      storage->bound_key.reset();
      if (buf.registered_) {
        buf.registered_ = false;
        share_->release(key, sim_.current_task(), ctx.chain);
      }
      co_await async_read(ctx, key, buf);
    }
  }
}

sim::Co<void> AgileCtrl::wait(ThreadCtx& ctx, AgileBuf& buf) {
  note_wait(ctx);
  co_await buf.active_->barrier->wait();
}

sim::Co<std::shared_ptr<service::TransactionBarrier>> AgileCtrl::async_write(ThreadCtx& ctx, BlockKey key,
                                                                             AgileBuf& buf) {
  check_key(key);
  if (!buf.active_->barrier->done()) {
    throw BufferBusy("asyncWrite from a buffer whose read is still pending");
  }
  ++stats_.writes;
  co_await sim_.sleep(timing_.api_overhead_ns);
  co_return co_await cache_.write_block(key, buf.active_->data.data(), ctx.thread_idx, ctx.chain);
}

void AgileCtrl::mark_modified(ThreadCtx& ctx, AgileBuf& buf) {
  if (share_ == nullptr || !buf.registered_ || !buf.active_->bound_key) {
    throw NotRegistered("buffer is not registered in the share table");
  }
  share_->mark_buffer_modified(*buf.active_->bound_key, sim_.current_task(), ctx.chain);
}

sim::Co<void> AgileCtrl::release(ThreadCtx& ctx, AgileBuf& buf) {
  if (!buf.registered_) {
    buf.active_ = buf.own_;
    co_return;
  }
  const BlockKey key = *buf.active_->bound_key;
  const sim::TaskId me = sim_.current_task();
  auto r = share_->release(key, me, ctx.chain);
  buf.registered_ = false;
  bool removed = r.removed;
  if (r.needs_propagation) {
    if (r.duty_transferred && sim_.trace().enabled()) {
      sim_.trace().emit("share", "duty_transfer", {{"dev", key.dev}, {"blk", static_cast<std::int64_t>(key.blk)}},
                        "owner finished first; last releaser writes back");
    }
    if (sim_.trace().enabled()) {
      sim_.trace().emit("share", "propagate", {{"dev", key.dev}, {"blk", static_cast<std::int64_t>(key.blk)}});
    }
    co_await cache_.propagate(key, r.buf->data.data(), ctx.thread_idx, ctx.chain);
    removed = share_->finish_release(key, r.version, ctx.chain);
  }
  if (r.buf == buf.own_ && !removed) {
    // The table keeps serving this storage to other holders.
    buf.own_ = make_storage(sim_, block_size());
  }
  buf.active_ = buf.own_;
}

AgileCtrl::Element AgileCtrl::locate(std::uint32_t dev, std::uint64_t idx, std::uint32_t elem_size) const {
  const std::uint32_t bs = block_size();
  if (elem_size == 0 || elem_size > 8 || bs % elem_size != 0) {
    throw ConfigError("element size " + std::to_string(elem_size) + " does not divide the block size");
  }
  const std::uint64_t byte = idx * elem_size;
  Element e{BlockKey{dev, byte / bs}, static_cast<std::uint32_t>(byte % bs)};
  check_key(e.key);
  return e;
}

sim::Co<void> AgileCtrl::read_block_sync(ThreadCtx& ctx, BlockKey key, std::span<std::byte> dst) {
  check_key(key);
  for (;;) {
    auto done = std::make_shared<service::TransactionBarrier>(sim_);
    done->rearm(sim_.current_task());
    cache::Waiter fill = [done, dst](const std::byte* d) {
      std::memcpy(dst.data(), d, dst.size());
      done->complete();
    };
    auto res = co_await cache_.access(key, ctx.thread_idx, ctx.chain, std::move(fill));
    if (res.kind != cache::AccessKind::hit) {
      note_wait(ctx);
      co_await done->wait();
      co_return;
    }
    const auto& line = cache_.line(res.line);
    if (line.tag == key && (line.state == cache::LineState::ready || line.state == cache::LineState::modified)) {
      std::memcpy(dst.data(), line.data.data(), dst.size());
      co_return;
    }
  }
}

sim::Co<std::uint64_t> AgileCtrl::array_get(ThreadCtx& ctx, std::uint32_t dev, std::uint64_t idx,
                                            std::uint32_t elem_size) {
  const Element e = locate(dev, idx, elem_size);
  ++stats_.array_gets;
  co_await sim_.sleep(timing_.api_overhead_ns);
  std::array<std::byte, 8> out{};
  for (;;) {
    auto done = std::make_shared<service::TransactionBarrier>(sim_);
    done->rearm(sim_.current_task());
    cache::Waiter fill = [done, &out, e, elem_size](const std::byte* d) {
      std::memcpy(out.data(), d + e.offset, elem_size);
      done->complete();
    };
    auto res = co_await cache_.access(e.key, ctx.thread_idx, ctx.chain, std::move(fill));
    if (res.kind != cache::AccessKind::hit) {
      note_wait(ctx);
      co_await done->wait();
      break;
    }
    const auto& line = cache_.line(res.line);
    if (line.tag == e.key && line.state != cache::LineState::busy && line.state != cache::LineState::invalid) {
      std::memcpy(out.data(), line.data.data() + e.offset, elem_size);
      break;
    }
  }
  co_return load_le(out.data(), elem_size);
}

sim::Co<std::uint64_t> AgileCtrl::warp_array_get(ThreadCtx& ctx, UserWarp& warp, std::uint32_t lane,
                                                 std::uint32_t dev, std::uint64_t idx, std::uint32_t elem_size) {
  const Element e = locate(dev, idx, elem_size);
  ++stats_.array_gets;
  auto a = co_await warp.rendezvous(lane, e.key);
  UserWarp::Slot& slot = warp.slot(a.group);
  if (a.leader) {
    slot.data.resize(block_size());
    co_await sim_.sleep(timing_.api_overhead_ns);
    co_await read_block_sync(ctx, e.key, slot.data);
    slot.ready.complete();
  } else {
    note_wait(ctx);
    co_await slot.ready.wait();
  }
  co_return load_le(slot.data.data() + e.offset, elem_size);
}

sim::Co<void> AgileCtrl::flush(ThreadCtx& ctx) { co_await cache_.flush(ctx.thread_idx, ctx.chain); }

}  // namespace agile::api
