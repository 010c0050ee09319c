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
 * @file audit.hpp
 * @brief Online trace auditor for the queue protocol and the cache.
 *
 * Subscribe it to a simulator's trace before running. Each NVMe command is
 * followed through enqueue, issue, fetch, complete, CQE, service pickup and
 * release on its (sq, sqe) slot; any out-of-order or repeated step is a
 * violation. Violation messages are kept (up to a cap) for diagnostics.
 */
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agile/sim.hpp"

namespace agile::audit {

struct AuditCounts {
  std::uint64_t enqueues = 0;
  std::uint64_t issues = 0;
  std::uint64_t fetches = 0;
  std::uint64_t completions = 0;
  std::uint64_t cqes = 0;
  std::uint64_t service_cqes = 0;
  std::uint64_t releases = 0;
  std::uint64_t sq_doorbells = 0;
  std::uint64_t cq_window_rings = 0;
  std::uint64_t cq_drain_rings = 0;
  std::uint64_t cq_drained_entries = 0;
  std::uint64_t cache_transitions = 0;
  std::uint64_t waits_holding_locks = 0;
  std::uint64_t exits_holding_locks = 0;
};

class ProtocolAuditor {
 public:
  static constexpr std::size_t kMaxMessages = 32;

  /// Subscribes to `sim`'s trace; the auditor must outlive the run.
  void attach(sim::Simulator& sim);
  void observe(const sim::TraceRecord& r);

  const AuditCounts& counts() const noexcept { return counts_; }
  std::uint64_t violations() const noexcept { return violations_; }
  const std::vector<std::string>& messages() const noexcept { return messages_; }

  /// Commands whose SQE has not been released yet.
  std::size_t open_commands() const noexcept { return slots_.size(); }
  /// True when every stage count matches and nothing is left open.
  bool balanced() const noexcept;

 private:
  enum class Stage : std::uint8_t { enqueued, issued, fetched, completed, posted, serviced };

  void violation(std::string msg);
  void advance(std::int64_t sq, std::int64_t sqe, Stage from, Stage to, const char* what);

  AuditCounts counts_;
  std::uint64_t violations_ = 0;
  std::vector<std::string> messages_;
  std::map<std::pair<std::int64_t, std::int64_t>, Stage> slots_;
  std::map<std::int64_t, std::int64_t> sq_doorbell_;
  std::map<std::int64_t, std::int64_t> cq_head_;
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> line_tag_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> tag_line_;
  std::map<std::int64_t, std::int64_t> line_state_;
};

}  // namespace agile::audit
