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

#include <cstddef>
#include <span>
#include <vector>

#include "flowspec/model_oracle.h"
#include "flowspec/token_tree.h"

namespace flowspec {

// L_exp value meaning "use L nodes and send all appended tokens as one segment".
inline constexpr int kExpandAll = -1;

struct ExpansionConfig {
  int L_exp = kExpandAll;
  int d_exp = 6;
  int d_se = 2;
  int L_se = 16;

  bool expands_all() const { return L_exp == kExpandAll; }
  bool operator==(const ExpansionConfig&) const = default;
};

/// Where newly appended entries land in the global sequence.
struct Placement {
  Position first_position = 0;  // slot of the first appended entry
  Position context_len = 0;     // l_glo, for tree position ids
};

struct MergeResult {
  DraftTree merged;
  std::vector<NodeId> appended;  // merged-tree ids of N_new, in `order`
};

/// Appends every node of `fresh` whose token path is missing from `existing`.
/// A node whose path already exists keeps the existing node; its fresh
/// children attach to it. Both trees must share the root token.
MergeResult merge_trees(const DraftTree& existing, const DraftTree& fresh, SequenceOrder order);

struct ContextExpansion {
  DraftTree merged;         // T_mer
  DraftSequence sequence;   // S_mer = S_pr ++ S_app
  std::size_t appended = 0; // |S_app|, the tail of `sequence`
  DraftTree base;           // fresh T_base rooted at x_new

  std::span<const SequenceEntry> appended_entries() const {
    return std::span(sequence.entries).last(appended);
  }
};

/// Grows a fresh base tree of depth d_exp from the current root, keeps its
/// best L_exp nodes (L when expanding all) as T_new, and merges T_new into
/// the pruned tree. `context` is the committed history before the root.
ContextExpansion context_expand(const DraftTree& pruned, const DraftSequence& pruned_seq,
                                std::span<const Token> context, const TokenModel& draft,
                                const ExpansionConfig& cfg, int k, int L, SequenceOrder order,
                                Placement placement);

struct ScoreExpansion {
  DraftTree tree;           // T with S_se appended
  DraftSequence sequence;   // S ++ S_se
  std::size_t appended = 0;

  std::span<const SequenceEntry> appended_entries() const {
    return std::span(sequence.entries).last(appended);
  }
};

/// Deepens `base` by d_se layers, then appends to `tree` the best L_se base
/// nodes that are missing from it and whose parent is in the tree or already
/// selected.
ScoreExpansion score_expand(const DraftTree& tree, const DraftSequence& seq, DraftTree& base,
                            std::span<const Token> context, const TokenModel& draft,
                            const ExpansionConfig& cfg, int k, SequenceOrder order,
                            Placement placement);

}  // namespace flowspec
