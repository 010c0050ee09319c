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
#include "agile/ssd_model.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace agile::ssd {

using nvme::Opcode;

void MemoryBlockStore::read(std::uint64_t blk, std::span<std::byte> out) {
  auto it = blocks_.find(blk);
  if (it == blocks_.end()) {
    std::fill(out.begin(), out.end(), std::byte{0});
  } else {
    std::copy_n(it->second.begin(), std::min<std::size_t>(out.size(), block_size_), out.begin());
  }
}

void MemoryBlockStore::write(std::uint64_t blk, std::span<const std::byte> in) {
  auto& b = blocks_[blk];
  b.assign(in.begin(), in.end());
  b.resize(block_size_);
}

FileBlockStore::FileBlockStore(const std::string& path, std::uint32_t block_size) : block_size_(block_size) {
  file_.open(path, std::ios::in | std::ios::out | std::ios::binary);
  if (!file_) {
    std::ofstream create(path, std::ios::binary);
    create.close();
    file_.open(path, std::ios::in | std::ios::out | std::ios::binary);
  }
  if (!file_) throw ConfigError("cannot open backing file " + path);
}

void FileBlockStore::read(std::uint64_t blk, std::span<std::byte> out) {
  std::fill(out.begin(), out.end(), std::byte{0});
  file_.clear();
  file_.seekg(static_cast<std::streamoff>(blk * block_size_));
  file_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  file_.clear();
}

void FileBlockStore::write(std::uint64_t blk, std::span<const std::byte> in) {
  file_.clear();
  file_.seekp(static_cast<std::streamoff>(blk * block_size_));
  file_.write(reinterpret_cast<const char*>(in.data()), static_cast<std::streamsize>(in.size()));
  file_.flush();
}

SsdDevice::SsdDevice(sim::Simulator& sim, std::uint32_t dev_idx, DeviceConfig cfg)
    : sim_(sim), idx_(dev_idx), cfg_(std::move(cfg)), rng_(sim.seed() * 0x9E3779B97F4A7C15ull + dev_idx) {
  if (cfg_.parallelism == 0) throw ConfigError("device parallelism must be positive");
  if (cfg_.block_size == 0) throw ConfigError("device block_size must be positive");
  if (cfg_.write_latency_ns == 0) cfg_.write_latency_ns = cfg_.base_latency_ns;
  task_ = sim.register_actor(sim::TaskKind::ssd_engine, "ssd" + std::to_string(dev_idx));
  if (cfg_.backing_file.empty()) {
    store_ = std::make_unique<MemoryBlockStore>(cfg_.block_size);
  } else {
    store_ = std::make_unique<FileBlockStore>(cfg_.backing_file, cfg_.block_size);
  }
}

void SsdDevice::bind(nvme::QueuePair& qp) { fetch_pos_[qp.idx] = 0; }

void SsdDevice::check_range(std::uint64_t blk) const {
  if (blk >= cfg_.blocks) {
    throw OutOfRange("block " + std::to_string(blk) + " beyond device " + std::to_string(idx_) + " (" +
                     std::to_string(cfg_.blocks) + " blocks)");
  }
}

std::vector<std::byte> SsdDevice::read_block(std::uint64_t blk) {
  check_range(blk);
  std::vector<std::byte> out(cfg_.block_size);
  store_->read(blk, out);
  return out;
}

void SsdDevice::write_block(std::uint64_t blk, std::span<const std::byte> data) {
  check_range(blk);
  store_->write(blk, data.first(std::min<std::size_t>(data.size(), cfg_.block_size)));
}

std::size_t SsdDevice::overflow_depth(const nvme::QueuePair& qp) const {
  auto it = overflow_.find(qp.idx);
  return it == overflow_.end() ? 0 : it->second.size();
}

double SsdDevice::saturated_bytes_per_s(Opcode op) const {
  const double lat = static_cast<double>(op == Opcode::read ? cfg_.base_latency_ns : cfg_.write_latency_ns);
  return static_cast<double>(cfg_.parallelism) * cfg_.block_size / (lat * 1e-9);
}

void SsdDevice::on_sq_doorbell(nvme::QueuePair& qp, std::uint32_t wrapped_tail) {
  auto& pos = fetch_pos_.at(qp.idx);
  const std::uint32_t depth = qp.sq.depth();
  const std::uint32_t delta = (wrapped_tail - static_cast<std::uint32_t>(pos & (depth - 1))) & (depth - 1);
  const std::uint64_t new_tail = pos + delta;
  if (new_tail > qp.sq.doorbell()) {
    throw ProtocolViolation("sq " + std::to_string(qp.idx) + " doorbell beyond published tail");
  }
  sim_.schedule(0, [this, &qp, new_tail] { fetch(qp, new_tail); }, task_);
}

void SsdDevice::fetch(nvme::QueuePair& qp, std::uint64_t new_tail) {
  auto& pos = fetch_pos_.at(qp.idx);
  for (; pos < new_tail; ++pos) {
    const std::uint32_t slot = qp.sq.slot_of(pos);
    if (qp.sq.state(slot) != nvme::SqeState::issued) {
      throw ProtocolViolation("device " + std::to_string(idx_) + " fetched sq " + std::to_string(qp.idx) +
                              " slot " + std::to_string(slot) + " in state " + to_string(qp.sq.state(slot)));
    }
    const nvme::NvmeCommand& cmd = qp.sq.command(slot);
    check_range(cmd.blk);
    ++stats_.fetched;
    if (sim_.trace().enabled()) {
      sim_.trace().emit("ssd", "fetch",
                        {{"dev", idx_}, {"sq", qp.idx}, {"sqe", slot}, {"cid", cmd.cid},
                         {"op", static_cast<std::int64_t>(cmd.opcode)}, {"blk", static_cast<std::int64_t>(cmd.blk)}});
    }
    pending_.push_back(Job{&qp, cmd, sim_.now()});
  }
  dispatch();
}

sim::SimTime SsdDevice::service_time(Opcode op) {
  sim::SimTime t = op == Opcode::read ? cfg_.base_latency_ns : cfg_.write_latency_ns;
  if (cfg_.jitter_ns == 0) return t;
  switch (cfg_.jitter) {
    case Jitter::none: break;
    case Jitter::uniform:
      t += std::uniform_int_distribution<sim::SimTime>(0, cfg_.jitter_ns - 1)(rng_);
      break;
    case Jitter::exponential:
      t += static_cast<sim::SimTime>(
          std::exponential_distribution<double>(1.0 / static_cast<double>(cfg_.jitter_ns))(rng_));
      break;
  }
  return t;
}

void SsdDevice::dispatch() {
  while (busy_ < cfg_.parallelism && !pending_.empty()) {
    Job job = pending_.front();
    pending_.pop_front();
    ++busy_;
    if (job.cmd.opcode == Opcode::write) {
      store_->write(job.cmd.blk, std::span<const std::byte>(job.cmd.dest, cfg_.block_size));
    }
    sim_.schedule(service_time(job.cmd.opcode), [this, job] { finish(job); }, task_);
  }
}

void SsdDevice::finish(Job job) {
  --busy_;
  if (job.cmd.opcode == Opcode::read) {
    store_->read(job.cmd.blk, std::span<std::byte>(job.cmd.dest, cfg_.block_size));
    ++stats_.reads;
  } else {
    ++stats_.writes;
  }
  ++stats_.completed;
  stats_.bytes += cfg_.block_size;
  if (sim_.trace().enabled()) {
    sim_.trace().emit("ssd", "complete",
                      {{"dev", idx_}, {"sq", job.qp->idx}, {"cid", job.cmd.cid},
                       {"op", static_cast<std::int64_t>(job.cmd.opcode)},
                       {"blk", static_cast<std::int64_t>(job.cmd.blk)},
                       {"lat", static_cast<std::int64_t>(sim_.now() - job.fetched_at)}});
  }
  auto& q = overflow_[job.qp->idx];
  if (!q.empty() || job.qp->cq.device_full()) {
    q.push_back(Overflow{job.cmd.cid});
    ++stats_.overflowed;
  } else {
    post(*job.qp, job.cmd.cid);
  }
  sim_.note_progress();
  dispatch();
}

void SsdDevice::post(nvme::QueuePair& qp, std::uint16_t cid) {
  const std::uint64_t pos = qp.cq.post(cid, qp.idx, 0);
  if (sim_.trace().enabled()) {
    sim_.trace().emit("ssd", "cqe", {{"cq", qp.idx}, {"pos", static_cast<std::int64_t>(pos)}, {"cid", cid},
                                     {"phase", nvme::phase_for(pos, qp.cq.depth())}});
  }
}

void SsdDevice::on_cq_doorbell(nvme::QueuePair& qp, std::uint32_t wrapped_head) {
  qp.cq.device_head_doorbell(wrapped_head);
  auto it = overflow_.find(qp.idx);
  if (it == overflow_.end()) return;
  while (!it->second.empty() && !qp.cq.device_full()) {
    post(qp, it->second.front().cid);
    it->second.pop_front();
  }
}

}  // namespace agile::ssd
