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

#include "flowspec/run_config.h"

#include <map>

#include <gtest/gtest.h>

namespace flowspec {
namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::string error_key(const std::string& text, const EnvLookup& env = {}) {
  try {
    parse_config(text, env);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

TEST(ParseConfig, EmptyGivesDefaults) {
  RunConfig c = parse_config("");
  EXPECT_EQ(c, RunConfig{});
  EXPECT_EQ(c.params.N, 4);
  EXPECT_EQ(c.params.L, 80);
  EXPECT_EQ(c.params.k, 10);
  EXPECT_EQ(c.params.L_max, 16);
  EXPECT_EQ(c.params.expansion.L_exp, kExpandAll);
  EXPECT_EQ(c.strategy, StrategyId::kFlowSpec);
}

TEST(ParseConfig, ReadsEverySection) {
  RunConfig c = parse_config(R"(
# comment
[oracle]
vocab_size = 16
alignment = 0.5
[cost]
stage_base_s = 0.1
[params]
strategy = naive_pp
N = 2
L_exp = 8
temperature = 0.7
[prompt]
tokens = 1, 2, 3
)");
  EXPECT_EQ(c.oracle.vocab_size, 16);
  EXPECT_DOUBLE_EQ(c.oracle.alignment, 0.5);
  EXPECT_EQ(c.strategy, StrategyId::kNaivePP);
  EXPECT_EQ(c.params.N, 2);
  ASSERT_EQ(c.cost.num_stages(), 2);
  EXPECT_DOUBLE_EQ(c.cost.stages[1].base_s, 0.1);
  EXPECT_EQ(c.params.expansion.L_exp, 8);
  EXPECT_DOUBLE_EQ(c.params.temperature, 0.7);
  EXPECT_DOUBLE_EQ(c.oracle.temperature, 0.7);
  EXPECT_EQ(c.prompt.tokens, (std::vector<Token>{1, 2, 3}));
}

TEST(ParseConfig, OutOfRangeNamesField) {
  try {
    parse_config("[params]\nN = 0\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("N"), std::string::npos);
  }
  EXPECT_EQ(error_key("[oracle]\nvocab_size = 1\n"), "oracle.vocab_size");
  EXPECT_EQ(error_key("[oracle]\nalignment = 1.5\n"), "oracle.alignment");
  EXPECT_EQ(error_key("[prompt]\ntokens = 99\n"), "prompt.tokens");
  EXPECT_EQ(error_key("[params]\neos_token = 64\n"), "params.eos_token");
  EXPECT_EQ(error_key("[cost]\nlink_bytes_per_s = 0\n"), "cost");
}

TEST(ParseConfig, RejectsMalformedInput) {
  EXPECT_EQ(error_key("[params]\nwidth = 3\n"), "params.width");
  EXPECT_EQ(error_key("[extras]\n"), "extras");
  EXPECT_EQ(error_key("[params]\nN = 2\nN = 3\n"), "params.N");
  EXPECT_EQ(error_key("[params]\nN = four\n"), "params.N");
  EXPECT_EQ(error_key("[params]\nstrategy = eagle\n"), "params.strategy");
  EXPECT_THROW(parse_config("[params]\nN\n"), ConfigError);
  EXPECT_THROW(parse_config("N = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[params\n"), ConfigError);
}

TEST(ParseConfig, EnvOverride) {
  EXPECT_EQ(env_var_name("params", "L_max"), "FLOWSPEC_PARAMS_L_MAX");
  RunConfig c = parse_config("[params]\nN = 2\n", env_of({{"FLOWSPEC_PARAMS_N", "6"},
                                                          {"FLOWSPEC_COST_LINK_LATENCY_S", "0.01"}}));
  EXPECT_EQ(c.params.N, 6);
  ASSERT_EQ(c.cost.num_stages(), 6);
  EXPECT_DOUBLE_EQ(c.cost.links[0].latency_s, 0.01);
  EXPECT_EQ(error_key("", env_of({{"FLOWSPEC_PARAMS_L", "0"}})), "params");
}

TEST(ToConfigText, RoundTrip) {
  RunConfig c = parse_config(R"(
[oracle]
seed = 17
alignment = 0.3
[cost]
link_latency_s = 0.0123456789
[params]
strategy = flowspec_no_sbd
N = 3
L_exp = 12
temperature = 0.25
[prompt]
tokens = 5,6,7
)");
  EXPECT_EQ(parse_config(to_config_text(c)), c);
  RunConfig d;
  EXPECT_EQ(parse_config(to_config_text(d)), d);
}

TEST(WithOverride, QualifiedAndBareKeys) {
  RunConfig c;
  RunConfig a = with_override(c, "params.L", "40");
  EXPECT_EQ(a.params.L, 40);
  RunConfig b = with_override(c, "L_max", "8");
  EXPECT_EQ(b.params.L_max, 8);
  RunConfig s = with_override(c, "strategy", "pruned_pp");
  EXPECT_EQ(s.strategy, StrategyId::kPrunedPP);
  RunConfig n = with_override(c, "N", "2");
  EXPECT_EQ(n.cost.num_stages(), 2);
  EXPECT_THROW(with_override(c, "seed", "3"), ConfigError);
  EXPECT_THROW(with_override(c, "params.width", "3"), ConfigError);
  EXPECT_THROW(with_override(c, "L", "0"), ConfigError);
}

TEST(MakePrompt, SeededAndExplicit) {
  PromptSpec spec;
  spec.length = 20;
  spec.seed = 3;
  auto a = make_prompt(spec, 64);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a, make_prompt(spec, 64));
  for (Token t : a) {
    EXPECT_GE(t, 0);
    EXPECT_LT(t, 64);
  }
  spec.seed = 4;
  EXPECT_NE(a, make_prompt(spec, 64));
  spec.tokens = {9, 8};
  EXPECT_EQ(make_prompt(spec, 64), (std::vector<Token>{9, 8}));
}

}  // namespace
}  // namespace flowspec
