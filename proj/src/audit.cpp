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
#include "agile/audit.hpp"

#include "agile/nvme_queue.hpp"
#include "agile/software_cache.hpp"

namespace agile::audit {

namespace {

constexpr std::int64_t kInvalid = static_cast<std::int64_t>(cache::LineState::invalid);
constexpr std::int64_t kBusy = static_cast<std::int64_t>(cache::LineState::busy);
constexpr std::int64_t kReady = static_cast<std::int64_t>(cache::LineState::ready);
constexpr std::int64_t kModified = static_cast<std::int64_t>(cache::LineState::modified);

bool legal_transition(std::int64_t from, std::int64_t to, bool writeback) {
  if (from == kInvalid) return to == kBusy;
  if (from == kBusy) return to == kReady || (to == kInvalid && writeback);
  if (from == kReady) return to == kModified || to == kInvalid;
  if (from == kModified) return to == kBusy;
  return false;
}

}  // namespace

void ProtocolAuditor::attach(sim::Simulator& sim) {
  sim.trace().subscribe([this](const sim::TraceRecord& r) { observe(r); });
}

void ProtocolAuditor::violation(std::string msg) {
  ++violations_;
  if (messages_.size() < kMaxMessages) messages_.push_back(std::move(msg));
}

void ProtocolAuditor::advance(std::int64_t sq, std::int64_t sqe, Stage from, Stage to, const char* what) {
  auto it = slots_.find({sq, sqe});
  if (it == slots_.end() || it->second != from) {
    violation(std::string(what) + " out of order on sq " + std::to_string(sq) + " sqe " + std::to_string(sqe));
    return;
  }
  it->second = to;
}

void ProtocolAuditor::observe(const sim::TraceRecord& r) {
  if (r.module == "nvme") {
    if (r.action == "enqueue") {
      ++counts_.enqueues;
      const auto sq = r.at("sq");
      const auto sqe = r.at("sqe");
      if (r.at("cid") != sqe) violation("cid differs from sqe index on sq " + std::to_string(sq));
      if (!slots_.emplace(std::pair{sq, sqe}, Stage::enqueued).second) {
        violation("cid " + std::to_string(sqe) + " reused while in flight on sq " + std::to_string(sq));
      }
    } else if (r.action == "issue") {
      ++counts_.issues;
      advance(r.at("sq"), r.at("sqe"), Stage::enqueued, Stage::issued, "issue");
    } else if (r.action == "sq_doorbell") {
      ++counts_.sq_doorbells;
      const auto sq = r.at("sq");
      const auto value = r.at("value");
      auto [it, fresh] = sq_doorbell_.emplace(sq, value);
      if (!fresh) {
        if (value <= it->second) violation("sq doorbell not monotone on sq " + std::to_string(sq));
        it->second = value;
      }
      if (r.at("count") <= 0) violation("empty sq doorbell on sq " + std::to_string(sq));
    } else if (r.action == "release") {
      ++counts_.releases;
      auto it = slots_.find({r.at("sq"), r.at("sqe")});
      if (it == slots_.end() || it->second != Stage::serviced) {
        violation("release out of order on sq " + std::to_string(r.at("sq")));
      } else {
        slots_.erase(it);
      }
    }
  } else if (r.module == "ssd") {
    if (r.action == "fetch") {
      ++counts_.fetches;
      advance(r.at("sq"), r.at("sqe"), Stage::issued, Stage::fetched, "fetch");
    } else if (r.action == "complete") {
      ++counts_.completions;
      advance(r.at("sq"), r.at("cid"), Stage::fetched, Stage::completed, "complete");
    } else if (r.action == "cqe") {
      ++counts_.cqes;
      advance(r.at("cq"), r.at("cid"), Stage::completed, Stage::posted, "cqe");
    }
  } else if (r.module == "svc") {
    if (r.action == "cqe") {
      ++counts_.service_cqes;
      advance(r.at("sq"), r.at("cid"), Stage::posted, Stage::serviced, "service cqe");
    } else if (r.action == "cq_doorbell") {
      const auto cq = r.at("cq");
      const auto head = r.at("head");
      const auto count = r.at("count");
      const bool drain = r.note == "drain";
      if (drain) {
        ++counts_.cq_drain_rings;
        counts_.cq_drained_entries += static_cast<std::uint64_t>(count);
        if (count <= 0 || count >= static_cast<std::int64_t>(nvme::CompletionQueue::kWindow)) {
          violation("drain rang " + std::to_string(count) + " entries on cq " + std::to_string(cq));
        }
      } else {
        ++counts_.cq_window_rings;
        if (count != static_cast<std::int64_t>(nvme::CompletionQueue::kWindow) ||
            head % static_cast<std::int64_t>(nvme::CompletionQueue::kWindow) != 0) {
          violation("cq " + std::to_string(cq) + " rang outside a full window");
        }
      }
      const std::int64_t prev = cq_head_.contains(cq) ? cq_head_[cq] : 0;
      if (head != prev + count) violation("cq head jumped on cq " + std::to_string(cq));
      cq_head_[cq] = head;
    }
  } else if (r.module == "cache" && r.action == "state") {
    ++counts_.cache_transitions;
    const auto line = r.at("line");
    const auto from = r.at("from");
    const auto to = r.at("to");
    const std::pair<std::int64_t, std::int64_t> tag{r.at("dev"), r.at("blk")};
    const std::int64_t known = line_state_.contains(line) ? line_state_[line] : kInvalid;
    if (known != from) violation("cache line " + std::to_string(line) + " state history broken");
    if (!legal_transition(from, to, r.note == "writeback")) {
      violation("illegal cache transition " + std::to_string(from) + "->" + std::to_string(to));
    }
    line_state_[line] = to;
    if (from == kInvalid && to == kBusy) {
      auto [it, fresh] = tag_line_.emplace(tag, line);
      if (!fresh && it->second != line) {
        violation("block " + std::to_string(tag.first) + ":" + std::to_string(tag.second) + " cached twice");
      }
      line_tag_[line] = tag;
    } else if (to == kInvalid) {
      tag_line_.erase(tag);
      line_tag_.erase(line);
    }
  } else if (r.module == "api") {
    if (r.action == "wait_holding_locks") ++counts_.waits_holding_locks;
    if (r.action == "exit_holding_locks") ++counts_.exits_holding_locks;
  }
}

bool ProtocolAuditor::balanced() const noexcept {
  const auto& c = counts_;
  return slots_.empty() && c.enqueues == c.issues && c.issues == c.fetches && c.fetches == c.completions &&
         c.completions == c.cqes && c.cqes == c.service_cqes && c.service_cqes == c.releases;
}

}  // namespace agile::audit
