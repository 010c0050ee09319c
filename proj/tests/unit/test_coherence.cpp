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
#include <cstdint>
#include <map>

#include "agile/coherence.hpp"
#include "doctest.h"

using namespace agile;
using namespace agile::coherence;

TEST_CASE("generated ops respect the parameters") {
  Params p;
  p.seed = 11;
  const auto ops = generate_ops(p);
  REQUIRE(ops.size() == p.tasks);
  for (const auto& list : ops) {
    CHECK(list.size() == p.ops_per_task);
    for (const Op& op : list) CHECK(op.blk < p.blocks);
  }
  CHECK(generate_ops(p).size() == ops.size());
  const auto again = generate_ops(p);
  for (std::size_t t = 0; t < ops.size(); ++t) {
    for (std::size_t i = 0; i < ops[t].size(); ++i) {
      CHECK(ops[t][i].kind == again[t][i].kind);
      CHECK(ops[t][i].blk == again[t][i].blk);
      CHECK(ops[t][i].value == again[t][i].value);
    }
  }
}

TEST_CASE("commit log replays to the reported reads") {
  Params p;
  p.seed = 3;
  bench::RunMonitor mon;
  const Result r = run(p, mon);
  CHECK(r.reads + r.writes == std::uint64_t{p.tasks} * p.ops_per_task);
  CHECK(r.commits.size() == r.reads + r.writes);
  // Independent replay of the commit log.
  std::map<std::uint64_t, std::uint64_t> mem;
  std::uint64_t prev = 0;
  std::uint64_t mismatches = 0;
  bool first = true;
  for (const Commit& c : r.commits) {
    if (!first) CHECK(c.seq > prev);
    first = false;
    prev = c.seq;
    if (c.kind == OpKind::write) {
      mem[c.blk] = c.value;
    } else {
      auto it = mem.find(c.blk);
      if (it != mem.end() && it->second != c.value) ++mismatches;
    }
  }
  CHECK(mismatches == r.stale_reads);
  CHECK(r.equivalent());
}

TEST_CASE("share table keeps tasks coherent") {
  bench::RunMonitor mon;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    Params p;
    p.seed = seed;
    const Result r = run(p, mon);
    CHECK_MESSAGE(r.equivalent(), "seed " << seed);
  }
  CHECK(mon.hygiene().clean());
}

TEST_CASE("private copies expose stale reads") {
  std::uint64_t stale = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    Params p;
    p.seed = seed;
    p.share_table = false;
    bench::RunMonitor mon;
    const Result r = run(p, mon);
    CHECK(r.unfinished_tasks == 0);
    stale += r.stale_reads;
  }
  CHECK(stale > 0);
}

TEST_CASE("same seed, same trace") {
  Params p;
  p.seed = 42;
  bench::RunMonitor a, b;
  const Result r1 = run(p, a);
  const Result r2 = run(p, b);
  CHECK(a.hygiene().digest == b.hygiene().digest);
  REQUIRE(r1.commits.size() == r2.commits.size());
  for (std::size_t i = 0; i < r1.commits.size(); ++i) {
    CHECK(r1.commits[i].task == r2.commits[i].task);
    CHECK(r1.commits[i].value == r2.commits[i].value);
  }
}
