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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowspec/expansion.h"
#include "flowspec/model_oracle.h"
#include "flowspec/pruning.h"
#include "flowspec/token_tree.h"
#include "flowspec/trace.h"

namespace flowspec {

struct StageCost {
  double base_s = 0.0;
  double per_token_s = 0.0;

  double compute_s(std::size_t tokens) const {
    return base_s + static_cast<double>(tokens) * per_token_s;
  }
  bool operator==(const StageCost&) const = default;
};

struct LinkCost {
  double latency_s = 0.0;
  double bytes_per_s = 1.0;  // +inf allowed
  double per_token_bytes = 0.0;

  double transfer_s(double bytes) const { return latency_s + bytes / bytes_per_s; }
  double segment_s(std::size_t tokens) const {
    return transfer_s(static_cast<double>(tokens) * per_token_bytes);
  }
  bool operator==(const LinkCost&) const = default;
};

struct DraftCost {
  double base_s = 0.0;
  double per_layer_s = 0.0;

  double growth_s(int layers) const { return base_s + layers * per_layer_s; }
  bool operator==(const DraftCost&) const = default;
};

/// Simulated device and network characteristics. stages[n-1] is V_n;
/// links[0] is D0->V1, links[n] is V_n->V_{n+1}, links[N] is V_N->D0.
/// Pruning messages travel on links[0]-shaped channels with
/// prune_bytes_per_position bytes per position.
struct CostModel {
  std::vector<StageCost> stages;
  std::vector<LinkCost> links;
  DraftCost draft;
  double d0_eval_s = 0.0;
  double prune_bytes_per_position = 4.0;

  int num_stages() const { return static_cast<int>(stages.size()); }
  bool valid_for(int N) const;
  bool operator==(const CostModel&) const = default;

  static CostModel uniform(int N, StageCost stage, LinkCost link, DraftCost draft,
                           double d0_eval_s);
  /// Desk-scale defaults: a 16-token stage pass (50 ms) costs about four
  /// 16-token link transfers (12.5 ms on a 100 Mbit/s LAN).
  static CostModel desk_default(int N);
  static CostModel zero(int N);
};

enum class StrategyId { kNaivePP, kPrunedPP, kFlowSpecNoSbd, kFlowSpec };

std::string_view to_string(StrategyId id);
StrategyId strategy_from_string(std::string_view name);

struct SimParams {
  int N = 4;
  int L = 80;
  int d0 = 6;
  int k = 10;
  int L_max = 16;
  ExpansionConfig expansion;
  double temperature = 0.0;
  int gen_limit = 128;
  Token eos_token = -1;  // negative: no EOS
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
  bool operator==(const SimParams&) const = default;
};

/// Scheduling switches that distinguish the strategies. Everything else
/// (tree growth, acceptance, pruning, expansion) is shared code.
struct StrategyFlags {
  bool stepwise = true;  // evaluate each segment as it arrives
  bool prune = true;     // prune in-flight work and exit rounds early
  bool expand = true;    // context- and score-aware expansion
  SequenceOrder order = SequenceOrder::kScore;

  static StrategyFlags for_strategy(StrategyId id);
};

struct RunResult {
  StrategyId strategy = StrategyId::kFlowSpec;
  std::vector<Token> committed;
  std::vector<TraceEvent> trace;
  std::optional<Metrics> metrics;  // absent when no decode time elapsed
  double prefill_s = 0.0;
  double end_s = 0.0;
  std::int64_t rounds = 0;
  std::int64_t steps = 0;
  std::optional<std::string> trace_path;
};

struct RoundCounters {
  std::int64_t generated = 0;  // nodes that entered the round's tree
  std::int64_t accepted = 0;   // nodes that became context
  std::int64_t pruned = 0;     // nodes removed by pruning
  std::int64_t discarded = 0;  // nodes dropped by a round exit
};

/// State exposed to observers after every D0 evaluation.
struct SimSnapshot {
  struct StageView {
    KvCacheIndex kv;
    std::int64_t applied_epoch = 0;
    std::vector<Position> queued;     // inbox
    std::vector<Position> computing;  // segment under compute
  };

  double time = 0.0;
  int round = 0;
  Position l_glo = 0;
  std::int64_t epoch = 0;
  std::vector<Position> tree_positions;
  std::vector<Position> pending;      // at D0, not yet dispatched
  std::vector<Position> in_transit;   // on any link
  std::vector<Position> awaiting_eval;// arrived at D0, not yet evaluated
  std::vector<Position> verified;     // base distribution known at D0
  std::vector<StageView> stages;      // V1..VN
  RoundCounters counters;
  std::int64_t tree_size = 0;
};

class SimObserver {
 public:
  virtual ~SimObserver() = default;
  virtual void on_event(const TraceEvent&) {}
  virtual void on_step(const SimSnapshot&) {}
};

/// Arrival time of a segment sent at `now`: now + latency + bytes / throughput.
/// Empty segments are never sent.
std::optional<double> dispatch_segment(const DraftSegment& segment, double now,
                                       const LinkCost& link);

/// Completion time of a forward pass queued behind `busy_until`.
double stage_compute(double now, double busy_until, const StageCost& cost, std::size_t tokens);

struct PrefillResult {
  Token first_token = 0;
  std::vector<KvCacheIndex> caches;  // V1..VN
  double elapsed_s = 0.0;
  std::vector<TraceEvent> trace;
};

/// Pipelines the prompt through V1..VN in chunks of L_max and samples the
/// first token from the base distribution of the last prompt token.
PrefillResult chunked_prefill(std::span<const Token> prompt, int L_max, int N,
                              const CostModel& cost, const TokenModel& base,
                              double temperature = 0.0, std::uint64_t seed = 0);

/// Runs prefill plus decoding under `strategy` in simulated time.
RunResult simulate(StrategyId strategy, std::span<const Token> prompt, const TokenModel& draft,
                   const TokenModel& base, const CostModel& cost, const SimParams& params,
                   SimObserver* observer = nullptr);

}  // namespace flowspec
