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

#include <algorithm>
#include <stdexcept>

namespace flowspec {

namespace {

void normalize_or_mask(TokenDistribution& dist, Token removed) {
  double sum = 0.0;
  for (double p : dist.probs) sum += p;
  if (sum > 0.0) {
    for (double& p : dist.probs) p /= sum;
    return;
  }
  dist.probs[static_cast<std::size_t>(removed)] = 0.0;
}

// Residual max(p - q, 0) after rejecting `token`. Falls back to p without
// `token` when the residual vanishes numerically.
TokenDistribution residual(const TokenDistribution& p, const TokenDistribution& q, Token token) {
  TokenDistribution r{std::vector<double>(p.size(), 0.0)};
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    r.probs[i] = std::max(p.probs[i] - q.probs[i], 0.0);
    sum += r.probs[i];
  }
  if (sum > 1e-300) {
    for (double& v : r.probs) v /= sum;
    return r;
  }
  r = p;
  r.probs[static_cast<std::size_t>(token)] = 0.0;
  normalize_or_mask(r, token);
  return r;
}

}  // namespace

VerificationOutcome accept_walk(const DraftTree& tree, const VerificationOutput& available,
                                SamplingMode mode, std::uint64_t rng_seed, const DraftLookup& draft) {
  if (!available.has(tree.root())) {
    throw ContractViolation("accept_walk: base distribution for the root is missing");
  }
  if (mode == SamplingMode::kStochastic && !draft) {
    throw std::invalid_argument("accept_walk: stochastic mode needs draft distributions");
  }
  VerificationOutcome out;
  SplitMix64 rng(rng_seed);
  NodeId cur = tree.root();
  while (true) {
    const TokenDistribution& base = available.per_token_dist.at(cur);
    std::optional<NodeId> next;
    Token sampled = 0;

    if (mode == SamplingMode::kGreedy) {
      sampled = base.argmax();
      next = tree.find_child(cur, sampled);
    } else {
      std::vector<NodeId> kids(tree.children(cur).begin(), tree.children(cur).end());
      sort_nodes(tree, kids, SequenceOrder::kScore);
      TokenDistribution p = base;
      if (!kids.empty()) {
        TokenDistribution q = draft(cur);
        for (NodeId c : kids) {
          Token t = tree.node(c).token;
          double qc = q[t];
          double pc = p[t];
          double accept = qc > 0.0 ? std::min(1.0, pc / qc) : (pc > 0.0 ? 1.0 : 0.0);
          if (rng.uniform() < accept) {
            next = c;
            sampled = t;
            break;
          }
          p = residual(p, q, t);
          q.probs[static_cast<std::size_t>(t)] = 0.0;
          normalize_or_mask(q, t);
        }
      }
      if (!next) {
        sampled = sample_token(p, rng.uniform());
        next = tree.find_child(cur, sampled);
      }
    }

    if (next && available.has(*next)) {
      out.accepted.push_back(sampled);
      out.accepted_nodes.push_back(*next);
      cur = *next;
      continue;
    }
    out.new_token = sampled;
    out.matched_node = next;
    out.continue_round = next.has_value();
    return out;
  }
}

bool continuous_condition(const DraftTree& tree, std::span<const Token> accepted, Token new_token) {
  std::vector<Token> path(accepted.begin(), accepted.end());
  path.push_back(new_token);
  return tree.find_path(path).has_value();
}

}  // namespace flowspec
