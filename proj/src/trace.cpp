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
#include "agile/trace.hpp"

#include <charconv>
#include <ostream>
#include <stdexcept>

namespace agile {

std::string to_string(const BlockKey& key) {
  return "(" + std::to_string(key.dev) + "," + std::to_string(key.blk) + ")";
}

namespace sim {

namespace {

template <typename Int>
void append_int(std::string& out, Int v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, end);
}

void format_into(const TraceRecord& r, std::string& out) {
  out.clear();
  append_int(out, r.time);
  out.push_back(' ');
  append_int(out, r.task);
  out.push_back(' ');
  out.append(r.module);
  out.push_back(' ');
  out.append(r.action);
  for (std::size_t i = 0; i < r.field_count; ++i) {
    out.push_back(' ');
    out.append(r.fields[i].key);
    out.push_back('=');
    append_int(out, r.fields[i].value);
  }
  if (!r.note.empty()) {
    out.push_back(' ');
    out.append(r.note);
  }
}

}  // namespace

std::optional<std::int64_t> TraceRecord::get(std::string_view key) const {
  for (std::size_t i = 0; i < field_count; ++i) {
    if (key == fields[i].key) return fields[i].value;
  }
  return std::nullopt;
}

std::int64_t TraceRecord::at(std::string_view key) const {
  if (auto v = get(key)) return *v;
  throw std::out_of_range("trace record has no field '" + std::string(key) + "'");
}

std::string TraceRecord::format() const {
  std::string out;
  format_into(*this, out);
  return out;
}

void Trace::emit(std::string_view module, std::string_view action,
                 std::initializer_list<TraceField> fields, std::string_view note) {
  if (!enabled()) return;
  TraceRecord rec;
  rec.time = *clock_;
  rec.task = *current_;
  rec.module = module;
  rec.action = action;
  for (const auto& f : fields) {
    if (rec.field_count == TraceRecord::kMaxFields) break;
    rec.fields[rec.field_count++] = f;
  }
  rec.note = note;
  ++lines_;

  if (sink_ != nullptr || hashing_) {
    format_into(rec, line_);
    line_.push_back('\n');
    if (hashing_) {
      for (unsigned char c : line_) {
        digest_ ^= c;
        digest_ *= 0x100000001b3ull;
      }
    }
    if (sink_ != nullptr) sink_->write(line_.data(), static_cast<std::streamsize>(line_.size()));
  }
  for (auto& l : listeners_) l(rec);
}

}  // namespace sim
}  // namespace agile
