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

#include <span>

#include "flowspec/pipeline_sim.h"

namespace flowspec {

/// FlowSpec: score-ordered segments, step-wise verification, pruning with
/// early exit, context- and score-aware expansion.
RunResult run_flowspec(std::span<const Token> prompt, const TokenModel& draft,
                       const TokenModel& base, const CostModel& cost, const SimParams& params);

/// Synchronous rounds: the whole tree goes through the pipeline, D0 waits for
/// every output and verifies once.
RunResult run_naive_pp(std::span<const Token> prompt, const TokenModel& draft,
                       const TokenModel& base, const CostModel& cost, const SimParams& params);

/// Naive PP plus step-wise pruning and early exit; no expansion.
RunResult run_pruned_pp(std::span<const Token> prompt, const TokenModel& draft,
                        const TokenModel& base, const CostModel& cost, const SimParams& params);

/// FlowSpec with breadth-first instead of score-ordered segments.
RunResult run_flowspec_no_sbd(std::span<const Token> prompt, const TokenModel& draft,
                              const TokenModel& base, const CostModel& cost,
                              const SimParams& params);

RunResult run_strategy(StrategyId id, std::span<const Token> prompt, const TokenModel& draft,
                       const TokenModel& base, const CostModel& cost, const SimParams& params);

}  // namespace flowspec
