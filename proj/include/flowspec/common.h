// Copyright 2026 The FlowSpec Simulator Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace flowspec {

using Token = std::int32_t;

// Absolute slot of a token in the global sequence. Committed context occupies
// [0, l_glo); draft tokens get fresh slots at dispatch time and keep them until
// they are accepted or pruned.
using Position = std::int64_t;

// Dense index of a node inside one DraftTree, assigned in insertion order.
struct NodeId {
  std::int32_t index = -1;

  constexpr bool valid() const { return index >= 0; }
  constexpr auto operator<=>(const NodeId&) const = default;
};

inline constexpr NodeId kNoNode{};

// Raised when a caller breaks a documented precondition between modules
// (e.g. pruning without a matched node, non-topological sequence input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// SplitMix64. Used for every seeded stream in the library so that oracle
// outputs and sampled tokens are identical across platforms.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  constexpr double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Order-dependent 64-bit mixing of a value into a running hash.
constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  SplitMix64 mix(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
  return mix.next();
}

}  // namespace flowspec

template <>
struct std::hash<flowspec::NodeId> {
  std::size_t operator()(flowspec::NodeId id) const noexcept {
    return std::hash<std::int32_t>{}(id.index);
  }
};
