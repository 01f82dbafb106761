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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowspec/common.h"

namespace flowspec {

class TokenModel;

// Cumulative scores never drop below this; keeps products of deep paths away
// from denormals.
inline constexpr double kMinScore = 1e-300;

struct DraftNode {
  Token token = 0;
  NodeId parent = kNoNode;
  double own_score = 1.0;
  double cu_score = 1.0;
  int depth = 0;
};

struct TokenPathHash {
  std::size_t operator()(const std::vector<Token>& path) const noexcept;
};

/// Rooted draft token tree. Node 0 is the root (the latest sampled token);
/// every other node is inserted after its parent, so NodeId order is a
/// topological order. Token paths from the root are unique and indexed.
class DraftTree {
 public:
  explicit DraftTree(Token root_token);

  NodeId root() const { return NodeId{0}; }
  Token root_token() const { return nodes_.front().token; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const {
    return id.valid() && static_cast<std::size_t>(id.index) < nodes_.size();
  }

  /// Throws std::invalid_argument for ids outside the tree.
  const DraftNode& node(NodeId id) const;
  std::span<const NodeId> children(NodeId id) const;
  std::span<const DraftNode> nodes() const { return nodes_; }

  struct InsertResult {
    NodeId id;
    bool inserted = false;
  };

  /// Adds `token` under `parent`. A duplicate token under the same parent is
  /// not inserted; if the new score is higher the existing node takes it and
  /// its subtree scores are recomputed.
  InsertResult add_child(NodeId parent, Token token, double own_score);

  std::optional<NodeId> find_child(NodeId parent, Token token) const;

  /// Node whose root-to-node token path (root token excluded) equals `path`.
  std::optional<NodeId> find_path(std::span<const Token> path) const;

  /// Tokens on the path from the root to `id`, root excluded.
  std::vector<Token> path_tokens(NodeId id) const;

  bool is_ancestor(NodeId ancestor, NodeId id) const;
  int max_depth() const;
  std::size_t path_index_size() const { return path_index_.size(); }

  /// Preorder "token:own_score:cu_score" lines, two spaces per depth level,
  /// scores with 6 significant digits.
  std::string to_debug_string() const;

 private:
  void rescore_subtree(NodeId id);

  std::vector<DraftNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
  std::unordered_map<std::vector<Token>, NodeId, TokenPathHash> path_index_;
};

/// Stored cumulative score of `node`: the product of own scores from the root.
double cumulative_score(const DraftTree& tree, NodeId node);

/// Ordering key used for top-k, top-L and score ordering: higher cu_score
/// first, lower NodeId on ties.
bool score_before(const DraftTree& tree, NodeId a, NodeId b);

/// Builds a tree from `nodes` (which must include `new_root` and be closed
/// under parent up to `new_root`). The result is re-rooted at `new_root` with
/// scores divided by the old root score. Relative NodeId order is preserved.
/// When `old_to_new` is given it receives the id mapping (kNoNode if dropped).
DraftTree extract_subtree(const DraftTree& tree, std::span<const NodeId> nodes,
                          NodeId new_root,
                          std::vector<NodeId>* old_to_new = nullptr);

/// Grows the base tree layer by layer: the k best frontier nodes of each
/// layer are expanded with the k most likely next tokens of the draft model.
/// The oracle is queried with context ++ [root_token] ++ path(node).
DraftTree grow_base_tree(const TokenModel& draft, std::span<const Token> context,
                         Token root_token, int depth, int k);

/// Adds `layers` more layers to `base`, starting from its deepest layer.
void extend_base_tree(DraftTree& base, const TokenModel& draft,
                      std::span<const Token> context, int layers, int k);

/// The top-k nodes of `candidates` under score_before.
std::vector<NodeId> top_nodes(const DraftTree& tree, std::vector<NodeId> candidates,
                              std::size_t k);

enum class SequenceOrder {
  kScore,         // descending cumulative score (score-based segmentation)
  kBreadthFirst,  // depth, then insertion order
};

void sort_nodes(const DraftTree& tree, std::vector<NodeId>& nodes, SequenceOrder order);

struct SequenceEntry {
  NodeId node;
  Token token = 0;
  Position position = 0;

  bool operator==(const SequenceEntry&) const = default;
};

/// Tree position ids (context length + depth) and the tree attention mask in
/// set form: ancestor_sets[i] lists the indices of entry i's strict ancestors
/// within the sequence.
struct AttentionMetadata {
  std::vector<Position> tree_position_ids;
  std::vector<std::vector<std::int32_t>> ancestor_sets;

  bool operator==(const AttentionMetadata&) const = default;
};

/// Throws ContractViolation when an ancestor appears after its descendant.
AttentionMetadata attention_metadata(const DraftTree& tree,
                                     std::span<const SequenceEntry> entries,
                                     Position context_len);

struct DraftSequence {
  std::vector<SequenceEntry> entries;
  std::vector<Position> tree_position_ids;
  std::vector<std::vector<std::int32_t>> ancestor_sets;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const DraftSequence&) const = default;
};

DraftSequence make_sequence(const DraftTree& tree, std::vector<SequenceEntry> entries,
                            Position context_len);

struct SelectedTree {
  DraftTree tree;
  DraftSequence sequence;
};

/// Keeps the min(L, |base|) best nodes of `base` (the root always survives)
/// and serializes them in `order`. Sequence positions start at
/// `first_position`, which is also the context length seen by the root.
SelectedTree select_top_L(const DraftTree& base, int L,
                          SequenceOrder order = SequenceOrder::kScore,
                          Position first_position = 0);

struct SegmentId {
  int round = 0;
  int ordinal = 0;

  bool operator==(const SegmentId&) const = default;
};

std::string to_string(SegmentId id);

struct SegmentEntry {
  Token token = 0;
  Position position = 0;
  Position tree_position_id = 0;
  // Global positions of the draft ancestors this token attends to, ascending.
  std::vector<Position> ancestors;

  bool operator==(const SegmentEntry&) const = default;
};

/// A unit of pipelined verification. Segments own their entries so that each
/// stage can prune its copy independently.
struct DraftSegment {
  SegmentId id;
  std::vector<SegmentEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<Position> positions() const;
  /// Ancestor sets as indices into this segment (ancestors held elsewhere in
  /// the KV cache are omitted).
  std::vector<std::vector<std::int32_t>> local_ancestor_sets() const;

  bool operator==(const DraftSegment&) const = default;
};

/// Splits seq[begin, end) into consecutive segments of at most `max_len`
/// entries. An empty range gives no segments.
std::vector<DraftSegment> segment_sequence(const DraftSequence& seq, std::size_t max_len,
                                           std::size_t begin = 0,
                                           SegmentId first_id = {});

}  // namespace flowspec
