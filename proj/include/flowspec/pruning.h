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
#include <limits>
#include <string>
#include <vector>

#include "flowspec/token_tree.h"
#include "flowspec/verifier.h"

namespace flowspec {

inline constexpr Position kNoHorizon = std::numeric_limits<Position>::max();

/// Pruning broadcast from the draft stage to every verification stage.
/// Positions are absolute slots. Slots at or beyond `horizon` were assigned
/// after the message was built and are never touched by it.
struct PruneMessage {
  std::vector<Position> accepted;  // I_acc: old root plus S_acc, ascending
  std::vector<Position> retained;  // I_pr: n_new and its descendants, ascending
  Position new_l_glo = 0;
  Position horizon = kNoHorizon;
  std::int64_t epoch = 0;

  /// I_retain = I_acc ∪ I_pr, ascending.
  std::vector<Position> retain_global() const;
  bool keeps(Position p) const;          // in I_retain or beyond the horizon
  bool keeps_draft(Position p) const;    // in I_pr or beyond the horizon
  /// Canonical wire form used in trace records.
  std::string to_json() const;
  static PruneMessage from_json(const std::string& text);
  bool operator==(const PruneMessage&) const = default;
};

/// Index view of one stage's KV cache.
struct KvCacheIndex {
  Position context_len = 0;             // l_glo as seen by the stage
  std::vector<Position> draft_entries;  // ascending, all >= context_len

  Position length() const { return context_len + static_cast<Position>(draft_entries.size()); }
  bool invariants_hold() const;
  bool operator==(const KvCacheIndex&) const = default;
};

struct PruneContext {
  Position l_glo = 0;                // context length before this prune
  Position horizon = kNoHorizon;     // next unassigned slot
  std::int64_t epoch = 0;
};

struct PruneResult {
  DraftTree tree;           // T_pr rooted at n_new, scores rescaled
  DraftSequence sequence;   // S_pr, original relative order
  PruneMessage message;
};

/// Throws ContractViolation if the outcome has no matched node.
PruneResult compute_prune(const DraftTree& tree, const DraftSequence& seq,
                          const VerificationOutcome& outcome, const PruneContext& ctx);

/// Keeps the entries the message retains and drops ancestors that left the
/// draft. May return an empty segment.
DraftSegment prune_segment(const DraftSegment& segment, const PruneMessage& msg);

KvCacheIndex prune_kv_cache(const KvCacheIndex& cache, const PruneMessage& msg);

bool should_exit_round(const VerificationOutcome& outcome);

}  // namespace flowspec
