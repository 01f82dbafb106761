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
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "flowspec/model_oracle.h"
#include "flowspec/token_tree.h"

namespace flowspec {

enum class SamplingMode { kGreedy, kStochastic };

/// Base-model next-token distributions received so far, keyed by the node
/// whose context produced them.
struct VerificationOutput {
  std::unordered_map<NodeId, TokenDistribution> per_token_dist;

  bool has(NodeId id) const { return per_token_dist.contains(id); }
};

struct VerificationOutcome {
  std::vector<Token> accepted;        // S_acc, root excluded
  std::vector<NodeId> accepted_nodes;  // nodes of S_acc, in path order
  Token new_token = 0;                 // x_new
  std::optional<NodeId> matched_node;  // n_new
  bool continue_round = false;
};

/// Draft distribution at a node (the q used for the children of that node).
using DraftLookup = std::function<TokenDistribution(NodeId)>;

/// Walks the tree from the root using the base distributions in `available`.
/// A matching child whose own distribution is not available yet ends the walk
/// as x_new (and becomes n_new). Stochastic mode needs `draft`; it runs
/// multi-branch rejection sampling over children in score order.
/// Throws ContractViolation when the root distribution is missing.
VerificationOutcome accept_walk(const DraftTree& tree, const VerificationOutput& available,
                                SamplingMode mode, std::uint64_t rng_seed,
                                const DraftLookup& draft = {});

/// True when S_acc ++ [x_new] is a path of the tree.
bool continuous_condition(const DraftTree& tree, std::span<const Token> accepted, Token new_token);

}  // namespace flowspec
