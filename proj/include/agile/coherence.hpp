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
 * @file coherence.hpp
 * @brief Small randomized read/write workload checked against a sequential
 * replay.
 *
 * Tasks read and write 8-byte values at the start of a few blocks. Every
 * read and write is stamped with a global commit number at the instant it
 * takes effect for the task (a read when its data is visible, a write when
 * the value is stored in the task's buffer). Replaying the commits in order
 * on a plain map gives the value each read must have seen and the final
 * content of every block.
 *
 * With the share table on, readers and writers of a block share one buffer.
 * With it off, each task works on a private copy and writes reach the cache
 * later through asyncWrite, so a concurrent reader can see an old value.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agile/bench.hpp"

namespace agile::coherence {

enum class OpKind { read, write };

struct Op {
  OpKind kind = OpKind::read;
  std::uint64_t blk = 0;
  std::uint64_t value = 0;
  /// Simulated delay before the op and, for writes, between store and release.
  sim::SimTime think_ns = 0;
  sim::SimTime hold_ns = 0;
};

struct Params {
  std::uint64_t seed = 1;
  std::uint32_t tasks = 4;
  std::uint32_t blocks = 4;
  std::uint32_t ops_per_task = 8;
  bool share_table = true;
  std::uint64_t cache_lines = 2;
  std::uint32_t queue_depth = 4;
};

/// The per-task op lists a seed produces.
std::vector<std::vector<Op>> generate_ops(const Params& p);

struct Commit {
  std::uint64_t seq = 0;
  std::uint32_t task = 0;
  OpKind kind = OpKind::read;
  std::uint64_t blk = 0;
  std::uint64_t value = 0;
};

struct Result {
  std::vector<Commit> commits;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  /// Reads whose value differs from the sequential replay.
  std::uint64_t stale_reads = 0;
  /// Blocks whose device or cached content differs from the replay.
  std::uint64_t final_mismatches = 0;
  std::uint32_t unfinished_tasks = 0;
  std::vector<std::string> notes;

  bool equivalent() const noexcept { return stale_reads == 0 && final_mismatches == 0 && unfinished_tasks == 0; }
};

Result run(const Params& p, bench::RunMonitor& mon);

}  // namespace agile::coherence
