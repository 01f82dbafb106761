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

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "reference.h"

namespace flowspec {
namespace {

using testing::Path;

DraftTree tree_from_paths(Token root, const std::vector<std::pair<Path, double>>& paths) {
  DraftTree tree(root);
  for (const auto& [path, own] : paths) {
    Path parent(path.begin(), path.end() - 1);
    tree.add_child(*tree.find_path(parent), path.back(), own);
  }
  return tree;
}

DraftSequence score_sequence(const DraftTree& tree, Position first) {
  return select_top_L(tree, static_cast<int>(tree.size()), SequenceOrder::kScore, first).sequence;
}

void expect_valid_sequence(const DraftTree& tree, const DraftSequence& seq) {
  ASSERT_EQ(seq.size(), tree.size());
  EXPECT_EQ(tree.path_index_size(), tree.size());
  std::map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < seq.size(); ++i) index[seq.entries[i].node] = i;
  ASSERT_EQ(index.size(), tree.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    NodeId parent = tree.node(seq.entries[i].node).parent;
    if (parent.valid()) EXPECT_LT(index.at(parent), i);
  }
}

void expect_prefix(const DraftSequence& before, const DraftSequence& after) {
  ASSERT_LE(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before.entries[i], after.entries[i]);
    EXPECT_EQ(before.ancestor_sets[i], after.ancestor_sets[i]);
    EXPECT_EQ(before.tree_position_ids[i], after.tree_position_ids[i]);
  }
}

TEST(MergeTrees, FullOverlapAppendsNothing) {
  DraftTree existing = tree_from_paths(0, {{{1}, 0.5}, {{2}, 0.3}, {{1, 3}, 0.5}});
  DraftTree fresh = tree_from_paths(0, {{{1}, 0.9}, {{1, 3}, 0.2}});
  auto m = merge_trees(existing, fresh, SequenceOrder::kScore);
  EXPECT_TRUE(m.appended.empty());
  EXPECT_EQ(testing::path_scores(m.merged), testing::path_scores(existing));
}

TEST(MergeTrees, DifferentRootsRejected) {
  EXPECT_THROW(merge_trees(DraftTree(0), DraftTree(1), SequenceOrder::kScore), ContractViolation);
}

TEST(MergeTrees, ExistingNodeKeepsItsScoreAndAdoptsChildren) {
  DraftTree existing = tree_from_paths(0, {{{1}, 0.5}});
  DraftTree fresh = tree_from_paths(0, {{{1}, 0.8}, {{1, 4}, 0.5}});
  auto m = merge_trees(existing, fresh, SequenceOrder::kScore);
  ASSERT_EQ(m.appended.size(), 1u);
  EXPECT_DOUBLE_EQ(m.merged.node(*m.merged.find_path(Path{1})).cu_score, 0.5);
  EXPECT_EQ(m.merged.node(m.appended[0]).parent, *m.merged.find_path(Path{1}));
  EXPECT_DOUBLE_EQ(m.merged.node(m.appended[0]).cu_score, 0.25);
}

TEST(MergeTrees, MatchesPathSetUnion) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    DraftTree a = testing::random_tree(rng, 1 + rng.next() % 25, 6);
    DraftTree b = testing::random_tree(rng, 1 + rng.next() % 25, 6);
    DraftTree b_rooted(a.root_token());
    for (std::size_t i = 1; i < b.size(); ++i) {
      NodeId id{static_cast<std::int32_t>(i)};
      Path p = testing::walk_path(b, id);
      Path parent(p.begin(), p.end() - 1);
      b_rooted.add_child(*b_rooted.find_path(parent), p.back(), b.node(id).own_score);
    }
    auto m = merge_trees(a, b_rooted, SequenceOrder::kScore);
    auto expected = testing::path_set(a);
    auto pb = testing::path_set(b_rooted);
    expected.insert(pb.begin(), pb.end());
    EXPECT_EQ(testing::path_set(m.merged), expected);
    EXPECT_EQ(m.merged.size(), a.size() + m.appended.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      NodeId id{static_cast<std::int32_t>(i)};
      EXPECT_EQ(testing::walk_path(m.merged, id), testing::walk_path(a, id));
    }
    for (std::size_t i = 1; i < m.appended.size(); ++i) {
      EXPECT_FALSE(score_before(m.merged, m.appended[i], m.appended[i - 1]));
    }
  }
}

TEST(ContextExpand, SingleRootTakesFreshTree) {
  OracleConfig cfg{16, 2, 0.8, 0.0};
  SyntheticDraftModel draft(cfg);
  std::vector<Token> ctx{3, 4};
  DraftTree pruned(9);
  DraftSequence pruned_seq = score_sequence(pruned, 50);
  ExpansionConfig ec;
  auto exp = context_expand(pruned, pruned_seq, ctx, draft, ec, 4, 20, SequenceOrder::kScore,
                            Placement{60, 50});
  auto fresh = select_top_L(grow_base_tree(draft, ctx, 9, ec.d_exp, 4), 20);
  EXPECT_EQ(exp.appended, 19u);
  EXPECT_EQ(testing::path_scores(exp.merged), testing::path_scores(fresh.tree));
  auto app = exp.appended_entries();
  for (std::size_t i = 0; i < app.size(); ++i) {
    EXPECT_EQ(app[i].position, 60 + static_cast<Position>(i));
    EXPECT_EQ(app[i].token, fresh.sequence.entries[i + 1].token);
  }
  expect_valid_sequence(exp.merged, exp.sequence);
}

TEST(ContextExpand, OverlapIsNotResent) {
  OracleConfig cfg{16, 5, 0.8, 0.0};
  SyntheticDraftModel draft(cfg);
  std::vector<Token> ctx{1, 2};
  ExpansionConfig ec;
  ec.d_exp = 3;
  auto fresh = select_top_L(grow_base_tree(draft, ctx, 7, ec.d_exp, 3), 10);
  auto exp = context_expand(fresh.tree, fresh.sequence, ctx, draft, ec, 3, 10, SequenceOrder::kScore,
                            Placement{10, 0});
  EXPECT_EQ(exp.appended, 0u);
  EXPECT_EQ(exp.sequence, fresh.sequence);
}

TEST(ContextExpand, LimitedSizeAndInvariants) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    OracleConfig cfg{6, rng.next(), 0.8, 0.0};
    SyntheticDraftModel draft(cfg);
    std::vector<Token> ctx{static_cast<Token>(rng.next() % 6)};
    Token root = static_cast<Token>(rng.next() % 6);
    auto start = select_top_L(grow_base_tree(draft, ctx, root, 3, 3), 1 + static_cast<int>(rng.next() % 15),
                              SequenceOrder::kScore, 30);
    ExpansionConfig ec;
    ec.L_exp = 1 + static_cast<int>(rng.next() % 12);
    ec.d_exp = 1 + static_cast<int>(rng.next() % 4);
    auto exp = context_expand(start.tree, start.sequence, ctx, draft, ec, 3, 80, SequenceOrder::kScore,
                              Placement{30 + static_cast<Position>(start.sequence.size()), 30});
    auto fresh = select_top_L(grow_base_tree(draft, ctx, root, ec.d_exp, 3), ec.L_exp).tree;
    auto expected = testing::path_set(start.tree);
    auto pf = testing::path_set(fresh);
    expected.insert(pf.begin(), pf.end());
    EXPECT_EQ(testing::path_set(exp.merged), expected);
    EXPECT_LE(exp.appended, static_cast<std::size_t>(ec.L_exp));
    expect_prefix(start.sequence, exp.sequence);
    expect_valid_sequence(exp.merged, exp.sequence);
  }
}

TEST(ScoreExpand, NothingNewWhenTreeCoversBase) {
  OracleConfig cfg{4, 1, 0.8, 0.0};
  SyntheticDraftModel draft(cfg);
  std::vector<Token> ctx{0};
  // T already holds every node the deepened base will contain.
  DraftTree base = grow_base_tree(draft, ctx, 2, 2, 2);
  DraftTree full = grow_base_tree(draft, ctx, 2, 4, 2);
  DraftSequence seq = score_sequence(full, 0);
  ExpansionConfig ec;
  auto exp = score_expand(full, seq, base, ctx, draft, ec, 2, SequenceOrder::kScore,
                          Placement{static_cast<Position>(seq.size()), 0});
  EXPECT_EQ(exp.appended, 0u);
  EXPECT_EQ(exp.sequence, seq);
}

TEST(ScoreExpand, TakesAllWhenBudgetIsLarge) {
  OracleConfig cfg{8, 3, 0.8, 0.0};
  SyntheticDraftModel draft(cfg);
  std::vector<Token> ctx{5};
  DraftTree base = grow_base_tree(draft, ctx, 1, 2, 3);
  auto sel = select_top_L(base, static_cast<int>(base.size()));
  ExpansionConfig ec;
  ec.L_se = 1000;
  auto exp = score_expand(sel.tree, sel.sequence, base, ctx, draft, ec, 3, SequenceOrder::kScore,
                          Placement{static_cast<Position>(sel.sequence.size()), 0});
  EXPECT_EQ(testing::path_set(exp.tree), testing::path_set(base));
}

TEST(ScoreExpand, RejectsForeignBase) {
  OracleConfig cfg{8, 3, 0.8, 0.0};
  SyntheticDraftModel draft(cfg);
  std::vector<Token> ctx{5};
  DraftTree base = grow_base_tree(draft, ctx, 1, 2, 3);
  DraftTree other(2);
  EXPECT_THROW(score_expand(other, score_sequence(other, 0), base, ctx, draft, ExpansionConfig{}, 3,
                            SequenceOrder::kScore, Placement{1, 0}),
               ContractViolation);
}

TEST(ScoreExpand, MatchesBruteForceSelection) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    OracleConfig cfg{6, rng.next(), 0.8, 0.0};
    SyntheticDraftModel draft(cfg);
    std::vector<Token> ctx{static_cast<Token>(rng.next() % 6)};
    Token root = static_cast<Token>(rng.next() % 6);
    const int k = 2 + static_cast<int>(rng.next() % 2);
    const int d0 = 1 + static_cast<int>(rng.next() % 3);
    DraftTree base = grow_base_tree(draft, ctx, root, d0, k);
    auto sel = select_top_L(base, 1 + static_cast<int>(rng.next() % base.size()), SequenceOrder::kScore, 40);
    ExpansionConfig ec;
    ec.d_se = 1 + static_cast<int>(rng.next() % 2);
    ec.L_se = 1 + static_cast<int>(rng.next() % 10);

    // Oracle: the deepened base, then greedily the best connected candidate.
    DraftTree deep = grow_base_tree(draft, ctx, root, d0 + ec.d_se, k);
    std::set<Path> have = testing::path_set(sel.tree);
    std::map<Path, double> scores = testing::path_scores(deep);
    std::vector<Path> order;
    for (NodeId id : testing::sorted_by_score(deep)) order.push_back(testing::walk_path(deep, id));
    std::set<Path> chosen;
    while (static_cast<int>(chosen.size()) < ec.L_se) {
      bool found = false;
      for (const Path& p : order) {
        if (have.contains(p) || chosen.contains(p)) continue;
        Path parent(p.begin(), p.end() - 1);
        if (!have.contains(parent) && !chosen.contains(parent)) continue;
        chosen.insert(p);
        found = true;
        break;
      }
      if (!found) break;
    }

    auto exp = score_expand(sel.tree, sel.sequence, base, ctx, draft, ec, k, SequenceOrder::kScore,
                            Placement{40 + static_cast<Position>(sel.sequence.size()), 40});
    std::set<Path> added;
    for (const auto& e : exp.appended_entries()) added.insert(testing::walk_path(exp.tree, e.node));
    EXPECT_EQ(added, chosen);
    EXPECT_EQ(testing::path_scores(base), scores);
    expect_prefix(sel.sequence, exp.sequence);
    expect_valid_sequence(exp.tree, exp.sequence);
    auto app = exp.appended_entries();
    for (std::size_t i = 1; i < app.size(); ++i) {
      EXPECT_GE(exp.tree.node(app[i - 1].node).cu_score, exp.tree.node(app[i].node).cu_score);
    }
  }
}

TEST(ScoreExpand, RepeatedCallsKeepDeepening) {
  OracleConfig cfg{8, 11, 0.8, 0.0};
  SyntheticDraftModel draft(cfg);
  std::vector<Token> ctx{2};
  DraftTree base = grow_base_tree(draft, ctx, 4, 2, 2);
  auto sel = select_top_L(base, static_cast<int>(base.size()));
  ExpansionConfig ec;
  ec.L_se = 100;
  auto first = score_expand(sel.tree, sel.sequence, base, ctx, draft, ec, 2, SequenceOrder::kScore,
                            Placement{static_cast<Position>(sel.sequence.size()), 0});
  auto second = score_expand(first.tree, first.sequence, base, ctx, draft, ec, 2, SequenceOrder::kScore,
                             Placement{static_cast<Position>(first.sequence.size()), 0});
  EXPECT_EQ(base.max_depth(), 6);
  EXPECT_GT(second.appended, 0u);
  expect_prefix(first.sequence, second.sequence);
}

}  // namespace
}  // namespace flowspec
