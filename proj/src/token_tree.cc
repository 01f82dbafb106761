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

#include "flowspec/token_tree.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "flowspec/model_oracle.h"

namespace flowspec {

std::size_t TokenPathHash::operator()(const std::vector<Token>& path) const noexcept {
  std::uint64_t h = 0x51ED270B27A3C2F1ULL ^ path.size();
  for (Token t : path) h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  return static_cast<std::size_t>(h);
}

DraftTree::DraftTree(Token root_token) {
  nodes_.push_back(DraftNode{root_token, kNoNode, 1.0, 1.0, 0});
  children_.emplace_back();
  path_index_.emplace(std::vector<Token>{}, NodeId{0});
}

const DraftNode& DraftTree::node(NodeId id) const {
  if (!contains(id)) {
    throw std::invalid_argument("unknown NodeId " + std::to_string(id.index));
  }
  return nodes_[static_cast<std::size_t>(id.index)];
}

std::span<const NodeId> DraftTree::children(NodeId id) const {
  node(id);
  return children_[static_cast<std::size_t>(id.index)];
}

std::optional<NodeId> DraftTree::find_child(NodeId parent, Token token) const {
  for (NodeId c : children(parent)) {
    if (nodes_[static_cast<std::size_t>(c.index)].token == token) return c;
  }
  return std::nullopt;
}

DraftTree::InsertResult DraftTree::add_child(NodeId parent, Token token, double own_score) {
  const DraftNode& p = node(parent);
  if (!(own_score >= 0.0 && own_score <= 1.0)) {
    throw std::invalid_argument("own_score outside [0, 1]");
  }
  if (auto existing = find_child(parent, token)) {
    auto& n = nodes_[static_cast<std::size_t>(existing->index)];
    if (own_score > n.own_score) {
      n.own_score = own_score;
      rescore_subtree(*existing);
    }
    return {*existing, false};
  }
  NodeId id{static_cast<std::int32_t>(nodes_.size())};
  DraftNode n{token, parent, own_score, std::max(own_score * p.cu_score, kMinScore), p.depth + 1};
  auto path = path_tokens(parent);
  path.push_back(token);
  nodes_.push_back(n);
  children_.emplace_back();
  children_[static_cast<std::size_t>(parent.index)].push_back(id);
  path_index_.emplace(std::move(path), id);
  return {id, true};
}

void DraftTree::rescore_subtree(NodeId id) {
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    auto& n = nodes_[static_cast<std::size_t>(cur.index)];
    double parent_cu = n.parent.valid() ? nodes_[static_cast<std::size_t>(n.parent.index)].cu_score : 1.0;
    n.cu_score = std::max(n.own_score * parent_cu, kMinScore);
    for (NodeId c : children_[static_cast<std::size_t>(cur.index)]) stack.push_back(c);
  }
}

std::optional<NodeId> DraftTree::find_path(std::span<const Token> path) const {
  auto it = path_index_.find(std::vector<Token>(path.begin(), path.end()));
  if (it == path_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Token> DraftTree::path_tokens(NodeId id) const {
  std::vector<Token> path;
  for (NodeId cur = id; cur != root(); cur = node(cur).parent) {
    path.push_back(node(cur).token);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

bool DraftTree::is_ancestor(NodeId ancestor, NodeId id) const {
  for (NodeId cur = node(id).parent; cur.valid(); cur = node(cur).parent) {
    if (cur == ancestor) return true;
  }
  return false;
}

int DraftTree::max_depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::string DraftTree::to_debug_string() const {
  std::ostringstream out;
  std::vector<NodeId> stack{root()};
  char buf[96];
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    const auto& n = node(id);
    std::snprintf(buf, sizeof buf, "%d:%.6g:%.6g", n.token, n.own_score, n.cu_score);
    out << std::string(static_cast<std::size_t>(2 * n.depth), ' ') << buf << '\n';
    auto kids = children(id);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return out.str();
}

double cumulative_score(const DraftTree& tree, NodeId node) {
  return tree.node(node).cu_score;
}

bool score_before(const DraftTree& tree, NodeId a, NodeId b) {
  double sa = tree.node(a).cu_score;
  double sb = tree.node(b).cu_score;
  if (sa != sb) return sa > sb;
  return a < b;
}

DraftTree extract_subtree(const DraftTree& tree, std::span<const NodeId> nodes, NodeId new_root,
                          std::vector<NodeId>* old_to_new) {
  std::vector<NodeId> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<NodeId> mapping(tree.size(), kNoNode);
  DraftTree out(tree.node(new_root).token);
  mapping[static_cast<std::size_t>(new_root.index)] = out.root();
  for (NodeId id : sorted) {
    if (id == new_root) continue;
    const auto& n = tree.node(id);
    NodeId parent = n.parent.valid() ? mapping[static_cast<std::size_t>(n.parent.index)] : kNoNode;
    if (!parent.valid()) {
      throw ContractViolation("extract_subtree: node " + std::to_string(id.index) +
                              " is not connected to the new root");
    }
    mapping[static_cast<std::size_t>(id.index)] = out.add_child(parent, n.token, n.own_score).id;
  }
  if (old_to_new) *old_to_new = std::move(mapping);
  return out;
}

std::vector<NodeId> top_nodes(const DraftTree& tree, std::vector<NodeId> candidates, std::size_t k) {
  auto by_score = [&](NodeId a, NodeId b) { return score_before(tree, a, b); };
  if (candidates.size() > k) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), by_score);
    candidates.resize(k);
  } else {
    std::sort(candidates.begin(), candidates.end(), by_score);
  }
  return candidates;
}

namespace {

void grow_layers(DraftTree& tree, std::vector<NodeId> frontier, const TokenModel& draft,
                 std::span<const Token> context, int layers, int k) {
  std::vector<Token> query(context.begin(), context.end());
  query.push_back(tree.root_token());
  const std::size_t prefix = query.size();
  for (int layer = 0; layer < layers && !frontier.empty(); ++layer) {
    std::vector<NodeId> next;
    for (NodeId parent : frontier) {
      query.resize(prefix);
      auto path = tree.path_tokens(parent);
      query.insert(query.end(), path.begin(), path.end());
      TokenDistribution dist = draft.next(query);
      for (Token t : top_k_tokens(dist, k)) {
        auto res = tree.add_child(parent, t, dist[t]);
        if (res.inserted) next.push_back(res.id);
      }
    }
    frontier = top_nodes(tree, std::move(next), static_cast<std::size_t>(k));
  }
}

}  // namespace

DraftTree grow_base_tree(const TokenModel& draft, std::span<const Token> context, Token root_token,
                         int depth, int k) {
  if (depth < 0) throw std::invalid_argument("grow_base_tree: depth must be >= 0");
  if (k < 1) throw std::invalid_argument("grow_base_tree: k must be >= 1");
  DraftTree tree(root_token);
  grow_layers(tree, {tree.root()}, draft, context, depth, k);
  return tree;
}

void extend_base_tree(DraftTree& base, const TokenModel& draft, std::span<const Token> context,
                      int layers, int k) {
  if (layers < 0) throw std::invalid_argument("extend_base_tree: layers must be >= 0");
  if (k < 1) throw std::invalid_argument("extend_base_tree: k must be >= 1");
  const int deepest = base.max_depth();
  std::vector<NodeId> last_layer;
  for (std::size_t i = 0; i < base.size(); ++i) {
    NodeId id{static_cast<std::int32_t>(i)};
    if (base.node(id).depth == deepest) last_layer.push_back(id);
  }
  grow_layers(base, top_nodes(base, std::move(last_layer), static_cast<std::size_t>(k)), draft,
              context, layers, k);
}

void sort_nodes(const DraftTree& tree, std::vector<NodeId>& nodes, SequenceOrder order) {
  if (order == SequenceOrder::kScore) {
    std::sort(nodes.begin(), nodes.end(),
              [&](NodeId a, NodeId b) { return score_before(tree, a, b); });
  } else {
    std::sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) {
      int da = tree.node(a).depth;
      int db = tree.node(b).depth;
      return da != db ? da < db : a < b;
    });
  }
}

AttentionMetadata attention_metadata(const DraftTree& tree, std::span<const SequenceEntry> entries,
                                     Position context_len) {
  AttentionMetadata meta;
  meta.tree_position_ids.reserve(entries.size());
  meta.ancestor_sets.reserve(entries.size());
  std::unordered_map<NodeId, std::int32_t> index_of;
  index_of.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!index_of.emplace(entries[i].node, static_cast<std::int32_t>(i)).second) {
      throw ContractViolation("attention_metadata: node listed twice");
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& n = tree.node(entries[i].node);
    meta.tree_position_ids.push_back(context_len + n.depth);
    std::vector<std::int32_t> ancestors;
    for (NodeId cur = n.parent; cur.valid(); cur = tree.node(cur).parent) {
      auto it = index_of.find(cur);
      if (it == index_of.end()) continue;
      if (it->second >= static_cast<std::int32_t>(i)) {
        throw ContractViolation("attention_metadata: ancestor at index " +
                                std::to_string(it->second) + " follows entry " + std::to_string(i));
      }
      ancestors.push_back(it->second);
    }
    std::sort(ancestors.begin(), ancestors.end());
    meta.ancestor_sets.push_back(std::move(ancestors));
  }
  return meta;
}

DraftSequence make_sequence(const DraftTree& tree, std::vector<SequenceEntry> entries,
                            Position context_len) {
  auto meta = attention_metadata(tree, entries, context_len);
  return DraftSequence{std::move(entries), std::move(meta.tree_position_ids),
                       std::move(meta.ancestor_sets)};
}

SelectedTree select_top_L(const DraftTree& base, int L, SequenceOrder order, Position first_position) {
  if (L < 1) throw std::invalid_argument("select_top_L: L must be >= 1");
  std::vector<NodeId> all;
  all.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) all.push_back(NodeId{static_cast<std::int32_t>(i)});
  auto chosen = top_nodes(base, std::move(all), static_cast<std::size_t>(L));
  // The root has score 1 and the smallest id, so it always ranks first.
  std::vector<NodeId> mapping;
  DraftTree tree = extract_subtree(base, chosen, base.root(), &mapping);

  std::vector<NodeId> ordered;
  ordered.reserve(tree.size());
  for (std::size_t i = 0; i < tree.size(); ++i) ordered.push_back(NodeId{static_cast<std::int32_t>(i)});
  sort_nodes(tree, ordered, order);

  std::vector<SequenceEntry> entries;
  entries.reserve(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    entries.push_back({ordered[i], tree.node(ordered[i]).token,
                       first_position + static_cast<Position>(i)});
  }
  DraftSequence seq = make_sequence(tree, std::move(entries), first_position);
  return SelectedTree{std::move(tree), std::move(seq)};
}

std::string to_string(SegmentId id) {
  return std::to_string(id.round) + "." + std::to_string(id.ordinal);
}

std::vector<Position> DraftSegment::positions() const {
  std::vector<Position> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.position);
  return out;
}

std::vector<std::vector<std::int32_t>> DraftSegment::local_ancestor_sets() const {
  std::unordered_map<Position, std::int32_t> index_of;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    index_of.emplace(entries[i].position, static_cast<std::int32_t>(i));
  }
  std::vector<std::vector<std::int32_t>> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    std::vector<std::int32_t> local;
    for (Position p : e.ancestors) {
      if (auto it = index_of.find(p); it != index_of.end()) local.push_back(it->second);
    }
    std::sort(local.begin(), local.end());
    out.push_back(std::move(local));
  }
  return out;
}

std::vector<DraftSegment> segment_sequence(const DraftSequence& seq, std::size_t max_len,
                                           std::size_t begin, SegmentId first_id) {
  if (max_len < 1) throw std::invalid_argument("segment_sequence: L_max must be >= 1");
  std::vector<DraftSegment> out;
  SegmentId id = first_id;
  for (std::size_t start = begin; start < seq.size(); start += max_len) {
    std::size_t end = std::min(seq.size(), start + max_len);
    DraftSegment segment{id, {}};
    segment.entries.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      SegmentEntry entry{seq.entries[i].token, seq.entries[i].position, seq.tree_position_ids[i], {}};
      for (std::int32_t a : seq.ancestor_sets[i]) {
        entry.ancestors.push_back(seq.entries[static_cast<std::size_t>(a)].position);
      }
      std::sort(entry.ancestors.begin(), entry.ancestors.end());
      segment.entries.push_back(std::move(entry));
    }
    out.push_back(std::move(segment));
    ++id.ordinal;
  }
  return out;
}

}  // namespace flowspec
