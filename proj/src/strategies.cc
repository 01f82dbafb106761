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

#include "flowspec/strategies.h"

namespace flowspec {

RunResult run_flowspec(std::span<const Token> prompt, const TokenModel& draft,
                       const TokenModel& base, const CostModel& cost, const SimParams& params) {
  return simulate(StrategyId::kFlowSpec, prompt, draft, base, cost, params);
}

RunResult run_naive_pp(std::span<const Token> prompt, const TokenModel& draft,
                       const TokenModel& base, const CostModel& cost, const SimParams& params) {
  return simulate(StrategyId::kNaivePP, prompt, draft, base, cost, params);
}

RunResult run_pruned_pp(std::span<const Token> prompt, const TokenModel& draft,
                        const TokenModel& base, const CostModel& cost, const SimParams& params) {
  return simulate(StrategyId::kPrunedPP, prompt, draft, base, cost, params);
}

RunResult run_flowspec_no_sbd(std::span<const Token> prompt, const TokenModel& draft,
                              const TokenModel& base, const CostModel& cost,
                              const SimParams& params) {
  return simulate(StrategyId::kFlowSpecNoSbd, prompt, draft, base, cost, params);
}

RunResult run_strategy(StrategyId id, std::span<const Token> prompt, const TokenModel& draft,
                       const TokenModel& base, const CostModel& cost, const SimParams& params) {
  switch (id) {
    case StrategyId::kNaivePP:
      return run_naive_pp(prompt, draft, base, cost, params);
    case StrategyId::kPrunedPP:
      return run_pruned_pp(prompt, draft, base, cost, params);
    case StrategyId::kFlowSpecNoSbd:
      return run_flowspec_no_sbd(prompt, draft, base, cost, params);
    case StrategyId::kFlowSpec:
      return run_flowspec(prompt, draft, base, cost, params);
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace flowspec
