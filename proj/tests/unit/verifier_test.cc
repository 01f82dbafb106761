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

#include "flowspec/verifier.h"

#include <gtest/gtest.h>

#include <map>

#include "flowspec/pruning.h"
#include "reference.h"

namespace flowspec {
namespace {

// Base distributions for every node of `tree`, given the committed history
// ending with the root token.
VerificationOutput full_output(const DraftTree& tree, const TokenModel& base,
                               const std::vector<Token>& history) {
  VerificationOutput out;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    NodeId id{static_cast<std::int32_t>(i)};
    std::vector<Token> ctx = history;
    auto path = tree.path_tokens(id);
    ctx.insert(ctx.end(), path.begin(), path.end());
    out.per_token_dist.emplace(id, base.next(ctx));
  }
  return out;
}

TEST(AcceptWalk, GreedyZeroAcceptance) {
  DraftTree tree(0);
  tree.add_child(tree.root(), 1, 0.6);
  tree.add_child(tree.root(), 2, 0.3);
  VerificationOutput out;
  out.per_token_dist[tree.root()] = TokenDistribution{{0.1, 0.2, 0.3, 0.4}};
  auto r = accept_walk(tree, out, SamplingMode::kGreedy, 0);
  EXPECT_TRUE(r.accepted.empty());
  EXPECT_EQ(r.new_token, 3);
  EXPECT_FALSE(r.matched_node.has_value());
  EXPECT_FALSE(r.continue_round);
  EXPECT_EQ(r.continue_round, continuous_condition(tree, r.accepted, r.new_token));
}

TEST(AcceptWalk, GreedyMatchWithoutDistributionContinues) {
  DraftTree tree(0);
  auto a = tree.add_child(tree.root(), 1, 0.6).id;
  tree.add_child(a, 2, 0.5);
  VerificationOutput out;
  out.per_token_dist[tree.root()] = TokenDistribution{{0.1, 0.6, 0.3}};
  auto r = accept_walk(tree, out, SamplingMode::kGreedy, 0);
  EXPECT_TRUE(r.accepted.empty());
  EXPECT_EQ(r.new_token, 1);
  EXPECT_EQ(r.matched_node, a);
  EXPECT_TRUE(r.continue_round);
}

TEST(AcceptWalk, PerfectAlignmentAcceptsWholeChain) {
  OracleConfig cfg{32, 6, 1.0, 0.0};
  SyntheticDraftModel draft(cfg);
  SyntheticBaseModel base(cfg);
  std::vector<Token> history{4, 8, 15};
  DraftTree tree = grow_base_tree(draft, std::span(history).first(2), history.back(), 5, 1);
  auto r = accept_walk(tree, full_output(tree, base, history), SamplingMode::kGreedy, 0);
  EXPECT_EQ(r.accepted.size(), 5u);
  EXPECT_EQ(r.accepted, tree.path_tokens(NodeId{5}));
  EXPECT_FALSE(r.continue_round);
}

TEST(AcceptWalk, MissingRootThrows) {
  DraftTree tree(0);
  VerificationOutput out;
  EXPECT_THROW(accept_walk(tree, out, SamplingMode::kGreedy, 0), ContractViolation);
}

TEST(AcceptWalk, StochasticNeedsDraft) {
  DraftTree tree(0);
  VerificationOutput out;
  out.per_token_dist[tree.root()] = TokenDistribution{{1.0}};
  EXPECT_THROW(accept_walk(tree, out, SamplingMode::kStochastic, 0), std::invalid_argument);
}

TEST(AcceptWalk, GreedyMatchesAutoregressiveReference) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    OracleConfig cfg{8, rng.next(), rng.uniform(), 0.0};
    SyntheticDraftModel draft(cfg);
    SyntheticBaseModel base(cfg);
    std::vector<Token> history{static_cast<Token>(rng.next() % 8), static_cast<Token>(rng.next() % 8)};
    DraftTree grown = grow_base_tree(draft, std::span(history).first(1), history.back(), 4, 3);
    auto tree = select_top_L(grown, 1 + static_cast<int>(rng.next() % 30)).tree;
    auto r = accept_walk(tree, full_output(tree, base, history), SamplingMode::kGreedy, 0);
    auto committed = r.accepted;
    committed.push_back(r.new_token);
    auto expected = autoregressive_greedy(base, history, static_cast<int>(committed.size()));
    EXPECT_EQ(committed, expected);
    for (std::size_t i = 0; i < r.accepted_nodes.size(); ++i) {
      NodeId parent = i == 0 ? tree.root() : r.accepted_nodes[i - 1];
      EXPECT_EQ(tree.node(r.accepted_nodes[i]).parent, parent);
    }
  }
}

TEST(AcceptWalk, StochasticSingleChildMatchesAnalyticLaw) {
  const std::vector<double> p{0.1, 0.4, 0.2, 0.3};
  const std::vector<double> q{0.4, 0.3, 0.2, 0.1};
  const int V = 4;

  // Joint law of (accepted, x_new) by exact enumeration over the draft token.
  std::map<std::pair<bool, Token>, double> analytic;
  double mass = 0.0;
  for (int i = 0; i < V; ++i) mass += std::max(p[i] - q[i], 0.0);
  for (int t = 0; t < V; ++t) {
    double a = std::min(1.0, p[t] / q[t]);
    analytic[{true, t}] += q[t] * a;
    for (int x = 0; x < V; ++x) analytic[{false, x}] += q[t] * (1.0 - a) * std::max(p[x] - q[x], 0.0) / mass;
  }

  const int trials = 100000;
  SplitMix64 rng(2024);
  std::map<std::pair<bool, Token>, double> empirical;
  std::vector<double> marginal(V, 0.0);
  for (int i = 0; i < trials; ++i) {
    Token t = sample_token(TokenDistribution{q}, rng.uniform());
    DraftTree tree(0);
    tree.add_child(tree.root(), t, q[static_cast<std::size_t>(t)]);
    VerificationOutput out;
    out.per_token_dist[tree.root()] = TokenDistribution{p};
    auto r = accept_walk(tree, out, SamplingMode::kStochastic, rng.next(),
                         [&](NodeId) { return TokenDistribution{q}; });
    empirical[{r.continue_round, r.new_token}] += 1.0 / trials;
    marginal[static_cast<std::size_t>(r.new_token)] += 1.0 / trials;
  }
  double tv = 0.0;
  for (bool acc : {false, true}) {
    for (Token x = 0; x < V; ++x) tv += std::abs(analytic[{acc, x}] - empirical[{acc, x}]);
  }
  EXPECT_LT(tv / 2.0, 0.01);
  EXPECT_LT(testing::total_variation(marginal, p), 0.01);
  auto law = testing::one_step_law(p, q);
  for (int x = 0; x < V; ++x) EXPECT_NEAR(law[static_cast<std::size_t>(x)], p[static_cast<std::size_t>(x)], 1e-12);
}

TEST(AcceptWalk, StochasticIsDeterministicPerSeed) {
  OracleConfig cfg{16, 3, 0.6, 1.0};
  SyntheticDraftModel draft(cfg);
  SyntheticBaseModel base(cfg);
  std::vector<Token> history{1, 2};
  DraftTree tree = grow_base_tree(draft, std::span(history).first(1), 2, 3, 3);
  auto out = full_output(tree, base, history);
  auto lookup = [&](NodeId id) {
    std::vector<Token> ctx = history;
    auto path = tree.path_tokens(id);
    ctx.insert(ctx.end(), path.begin(), path.end());
    return draft.next(ctx);
  };
  auto a = accept_walk(tree, out, SamplingMode::kStochastic, 99, lookup);
  auto b = accept_walk(tree, out, SamplingMode::kStochastic, 99, lookup);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_EQ(a.new_token, b.new_token);
}

TEST(ContinuousCondition, ChildOfRoot) {
  DraftTree tree(0);
  tree.add_child(tree.root(), 5, 0.5);
  EXPECT_TRUE(continuous_condition(tree, {}, 5));
  EXPECT_FALSE(continuous_condition(tree, {}, 6));
}

TEST(ContinuousCondition, OffPath) {
  DraftTree tree(0);
  auto a = tree.add_child(tree.root(), 1, 0.5).id;
  tree.add_child(a, 2, 0.5);
  std::vector<Token> acc{1};
  EXPECT_TRUE(continuous_condition(tree, acc, 2));
  EXPECT_FALSE(continuous_condition(tree, acc, 1));
}

TEST(ContinuousCondition, MatchesLinearScan) {
  SplitMix64 rng(19);
  for (int trial = 0; trial < 300; ++trial) {
    DraftTree tree = testing::random_tree(rng, 25, 3);
    std::vector<Token> acc;
    int len = static_cast<int>(rng.next() % 4);
    for (int i = 0; i < len; ++i) acc.push_back(static_cast<Token>(rng.next() % 3));
    Token x = static_cast<Token>(rng.next() % 3);
    auto full = acc;
    full.push_back(x);
    bool linear = false;
    for (std::size_t i = 0; i < tree.size(); ++i) {
      linear |= testing::walk_path(tree, NodeId{static_cast<std::int32_t>(i)}) == full;
    }
    EXPECT_EQ(continuous_condition(tree, acc, x), linear);

    VerificationOutcome outcome;
    outcome.accepted = acc;
    outcome.new_token = x;
    outcome.matched_node = tree.find_path(full);
    outcome.continue_round = outcome.matched_node.has_value();
    EXPECT_EQ(should_exit_round(outcome), !linear);
  }
}

}  // namespace
}  // namespace flowspec
