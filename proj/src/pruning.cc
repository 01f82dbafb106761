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

#include "flowspec/pruning.h"

#include <algorithm>
#include <unordered_map>

#include "json.hpp"

namespace flowspec {

std::vector<Position> PruneMessage::retain_global() const {
  std::vector<Position> out;
  out.reserve(accepted.size() + retained.size());
  std::merge(accepted.begin(), accepted.end(), retained.begin(), retained.end(),
             std::back_inserter(out));
  return out;
}

bool PruneMessage::keeps_draft(Position p) const {
  return p >= horizon || std::binary_search(retained.begin(), retained.end(), p);
}

bool PruneMessage::keeps(Position p) const {
  return keeps_draft(p) || std::binary_search(accepted.begin(), accepted.end(), p);
}

std::string PruneMessage::to_json() const {
  nlohmann::ordered_json j;
  j["acc"] = accepted;
  j["pr"] = retained;
  j["l_glo"] = new_l_glo;
  if (horizon == kNoHorizon) {
    j["horizon"] = nullptr;
  } else {
    j["horizon"] = horizon;
  }
  j["epoch"] = epoch;
  return j.dump();
}

PruneMessage PruneMessage::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  PruneMessage msg;
  msg.accepted = j.at("acc").get<std::vector<Position>>();
  msg.retained = j.at("pr").get<std::vector<Position>>();
  msg.new_l_glo = j.at("l_glo").get<Position>();
  msg.horizon = j.at("horizon").is_null() ? kNoHorizon : j.at("horizon").get<Position>();
  msg.epoch = j.at("epoch").get<std::int64_t>();
  return msg;
}

bool KvCacheIndex::invariants_hold() const {
  for (std::size_t i = 0; i < draft_entries.size(); ++i) {
    if (draft_entries[i] < context_len) return false;
    if (i > 0 && draft_entries[i] <= draft_entries[i - 1]) return false;
  }
  return true;
}

PruneResult compute_prune(const DraftTree& tree, const DraftSequence& seq,
                          const VerificationOutcome& outcome, const PruneContext& ctx) {
  if (!outcome.matched_node) {
    throw ContractViolation("compute_prune: no matched node; the round must exit instead");
  }
  const NodeId matched = *outcome.matched_node;
  tree.node(matched);

  std::vector<char> keep(tree.size(), 0);
  std::vector<NodeId> kept;
  for (std::size_t i = static_cast<std::size_t>(matched.index); i < tree.size(); ++i) {
    NodeId id{static_cast<std::int32_t>(i)};
    const auto& n = tree.node(id);
    if (id == matched || (n.parent.valid() && keep[static_cast<std::size_t>(n.parent.index)])) {
      keep[i] = 1;
      kept.push_back(id);
    }
  }

  std::unordered_map<NodeId, Position> position_of;
  position_of.reserve(seq.size());
  for (const auto& e : seq.entries) position_of.emplace(e.node, e.position);
  auto position = [&](NodeId id) {
    auto it = position_of.find(id);
    if (it == position_of.end()) {
      throw ContractViolation("compute_prune: node " + std::to_string(id.index) +
                              " missing from the draft sequence");
    }
    return it->second;
  };

  PruneMessage msg;
  msg.accepted.push_back(position(tree.root()));
  for (NodeId id : outcome.accepted_nodes) msg.accepted.push_back(position(id));
  for (NodeId id : kept) msg.retained.push_back(position(id));
  std::sort(msg.accepted.begin(), msg.accepted.end());
  std::sort(msg.retained.begin(), msg.retained.end());
  msg.new_l_glo = ctx.l_glo + static_cast<Position>(msg.accepted.size());
  msg.horizon = ctx.horizon;
  msg.epoch = ctx.epoch;

  std::vector<NodeId> mapping;
  DraftTree pruned = extract_subtree(tree, kept, matched, &mapping);
  std::vector<SequenceEntry> entries;
  for (const auto& e : seq.entries) {
    if (keep[static_cast<std::size_t>(e.node.index)]) {
      entries.push_back({mapping[static_cast<std::size_t>(e.node.index)], e.token, e.position});
    }
  }
  DraftSequence pruned_seq = make_sequence(pruned, std::move(entries), msg.new_l_glo);
  return PruneResult{std::move(pruned), std::move(pruned_seq), std::move(msg)};
}

DraftSegment prune_segment(const DraftSegment& segment, const PruneMessage& msg) {
  DraftSegment out{segment.id, {}};
  for (const auto& e : segment.entries) {
    if (!msg.keeps(e.position)) continue;
    SegmentEntry kept = e;
    std::erase_if(kept.ancestors, [&](Position p) { return !msg.keeps_draft(p); });
    out.entries.push_back(std::move(kept));
  }
  return out;
}

KvCacheIndex prune_kv_cache(const KvCacheIndex& cache, const PruneMessage& msg) {
  KvCacheIndex out;
  out.context_len = std::max(cache.context_len, msg.new_l_glo);
  for (Position p : cache.draft_entries) {
    if (msg.keeps_draft(p) && p >= out.context_len) out.draft_entries.push_back(p);
  }
  return out;
}

bool should_exit_round(const VerificationOutcome& outcome) { return !outcome.continue_round; }

}  // namespace flowspec
