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
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agile/types.hpp"

namespace agile::sim {

struct TraceField {
  const char* key;
  std::int64_t value;
};

/// One trace line: `<time_ns> <task_id> <module> <action> <details>`, where
/// details are `key=value` pairs followed by an optional free-form note.
struct TraceRecord {
  static constexpr std::size_t kMaxFields = 8;

  SimTime time = 0;
  TaskId task = kNoTask;
  std::string_view module;
  std::string_view action;
  std::array<TraceField, kMaxFields> fields{};
  std::size_t field_count = 0;
  std::string_view note;

  std::optional<std::int64_t> get(std::string_view key) const;
  std::int64_t at(std::string_view key) const;
  std::string format() const;
};

class Trace {
 public:
  using Listener = std::function<void(const TraceRecord&)>;

  Trace(const SimTime* clock, const TaskId* current) : clock_(clock), current_(current) {}

  /// Cheap guard so hot paths skip building records nobody consumes.
  bool enabled() const noexcept { return sink_ != nullptr || hashing_ || !listeners_.empty(); }

  void set_sink(std::ostream* sink) { sink_ = sink; }
  void enable_digest(bool on) { hashing_ = on; }
  /// FNV-1a over every formatted line (with trailing newline).
  std::uint64_t digest() const noexcept { return digest_; }
  std::uint64_t lines() const noexcept { return lines_; }

  void subscribe(Listener listener) { listeners_.push_back(std::move(listener)); }

  void emit(std::string_view module, std::string_view action,
            std::initializer_list<TraceField> fields = {}, std::string_view note = {});

 private:
  const SimTime* clock_;
  const TaskId* current_;
  std::ostream* sink_ = nullptr;
  bool hashing_ = false;
  std::uint64_t digest_ = 0xcbf29ce484222325ull;
  std::uint64_t lines_ = 0;
  std::vector<Listener> listeners_;
  std::string line_;
};

}  // namespace agile::sim
