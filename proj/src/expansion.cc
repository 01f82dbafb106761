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

#include "flowspec/expansion.h"

#include <algorithm>

namespace flowspec {

namespace {

DraftSequence append_entries(const DraftTree& tree, const DraftSequence& seq,
                             std::span<const NodeId> appended, Placement placement) {
  std::vector<SequenceEntry> entries = seq.entries;
  entries.reserve(entries.size() + appended.size());
  for (std::size_t i = 0; i < appended.size(); ++i) {
    entries.push_back({appended[i], tree.node(appended[i]).token,
                       placement.first_position + static_cast<Position>(i)});
  }
  return make_sequence(tree, std::move(entries), placement.context_len);
}

}  // namespace

MergeResult merge_trees(const DraftTree& existing, const DraftTree& fresh, SequenceOrder order) {
  if (existing.root_token() != fresh.root_token()) {
    throw ContractViolation("merge_trees: trees have different roots");
  }
  MergeResult out{existing, {}};
  std::vector<NodeId> mapping(fresh.size(), kNoNode);
  mapping[0] = out.merged.root();
  for (std::size_t i = 1; i < fresh.size(); ++i) {
    const auto& n = fresh.nodes()[i];
    NodeId parent = mapping[static_cast<std::size_t>(n.parent.index)];
    if (auto existing = out.merged.find_child(parent, n.token)) {
      mapping[i] = *existing;
      continue;
    }
    mapping[i] = out.merged.add_child(parent, n.token, n.own_score).id;
    out.appended.push_back(mapping[i]);
  }
  sort_nodes(out.merged, out.appended, order);
  return out;
}

ContextExpansion context_expand(const DraftTree& pruned, const DraftSequence& pruned_seq,
                                std::span<const Token> context, const TokenModel& draft,
                                const ExpansionConfig& cfg, int k, int L, SequenceOrder order,
                                Placement placement) {
  DraftTree base = grow_base_tree(draft, context, pruned.root_token(), cfg.d_exp, k);
  const int size = cfg.expands_all() ? L : cfg.L_exp;
  DraftTree fresh = select_top_L(base, size).tree;
  MergeResult merged = merge_trees(pruned, fresh, order);
  DraftSequence seq = append_entries(merged.merged, pruned_seq, merged.appended, placement);
  return ContextExpansion{std::move(merged.merged), std::move(seq), merged.appended.size(),
                          std::move(base)};
}

ScoreExpansion score_expand(const DraftTree& tree, const DraftSequence& seq, DraftTree& base,
                            std::span<const Token> context, const TokenModel& draft,
                            const ExpansionConfig& cfg, int k, SequenceOrder order,
                            Placement placement) {
  if (base.root_token() != tree.root_token()) {
    throw ContractViolation("score_expand: base tree is rooted elsewhere");
  }
  extend_base_tree(base, draft, context, cfg.d_se, k);

  ScoreExpansion out{tree, {}, 0};
  std::vector<NodeId> in_tree(base.size(), kNoNode);
  in_tree[0] = out.tree.root();
  std::vector<NodeId> candidates;
  for (std::size_t i = 1; i < base.size(); ++i) {
    const auto& n = base.nodes()[i];
    NodeId parent = in_tree[static_cast<std::size_t>(n.parent.index)];
    if (parent.valid()) {
      if (auto existing = out.tree.find_child(parent, n.token)) {
        in_tree[i] = *existing;
        continue;
      }
    }
    candidates.push_back(NodeId{static_cast<std::int32_t>(i)});
  }
  sort_nodes(base, candidates, SequenceOrder::kScore);

  // A parent always ranks ahead of its children, so a single pass in score
  // order sees every parent decision before the child is considered.
  std::vector<NodeId> appended;
  for (NodeId c : candidates) {
    if (appended.size() >= static_cast<std::size_t>(cfg.L_se)) break;
    const auto& n = base.node(c);
    NodeId parent = in_tree[static_cast<std::size_t>(n.parent.index)];
    if (!parent.valid()) continue;
    auto res = out.tree.add_child(parent, n.token, n.own_score);
    in_tree[static_cast<std::size_t>(c.index)] = res.id;
    appended.push_back(res.id);
  }
  sort_nodes(out.tree, appended, order);
  out.sequence = append_entries(out.tree, seq, appended, placement);
  out.appended = appended.size();
  return out;
}

}  // namespace flowspec
