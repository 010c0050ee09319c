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

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace agile {

namespace sim {
/// Simulated nanoseconds.
using SimTime = std::uint64_t;
using TaskId = std::int32_t;
inline constexpr TaskId kNoTask = -1;
}  // namespace sim

/// A device block: the unit of NVMe transfer and of caching.
struct BlockKey {
  std::uint32_t dev = 0;
  std::uint64_t blk = 0;

  friend bool operator==(const BlockKey&, const BlockKey&) = default;
  friend auto operator<=>(const BlockKey&, const BlockKey&) = default;
};

struct BlockKeyHash {
  std::size_t operator()(const BlockKey& k) const noexcept {
    std::uint64_t x = k.blk * 0x9E3779B97F4A7C15ull ^ (std::uint64_t{k.dev} << 56 | k.dev);
    x ^= x >> 31;
    return static_cast<std::size_t>(x);
  }
};

std::string to_string(const BlockKey& key);

// Error taxonomy. Protocol violations indicate a bug in a protocol
// participant and abort the run; the rest are caller errors.

class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnknownCid : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

class IllegalState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class NotRegistered : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DoubleRelease : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NotHeld : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Reusing an AgileBuf whose read has not completed.
class BufferBusy : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace agile
