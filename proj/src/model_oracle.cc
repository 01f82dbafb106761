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

#include "flowspec/model_oracle.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace flowspec {

namespace {

constexpr std::uint64_t kDraftSalt = 0xD4A7'0000'0000'0001ULL;
constexpr std::uint64_t kIndependentSalt = 0xBA5E'0000'0000'0002ULL;

void require_context(std::span<const Token> context) {
  if (context.empty()) throw std::invalid_argument("oracle query with empty context");
}

}  // namespace

Token TokenDistribution::argmax() const {
  if (probs.empty()) throw std::invalid_argument("argmax of empty distribution");
  // max_element returns the first maximum, i.e. the lowest token id.
  return static_cast<Token>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

bool TokenDistribution::is_normalized(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) return false;
    sum += p;
  }
  return !probs.empty() && std::abs(sum - 1.0) <= tol;
}

std::vector<Token> top_k_tokens(const TokenDistribution& dist, int k) {
  std::vector<Token> tokens(dist.size());
  std::iota(tokens.begin(), tokens.end(), 0);
  auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), tokens.size());
  std::partial_sort(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n), tokens.end(),
                    [&](Token a, Token b) { return dist[a] != dist[b] ? dist[a] > dist[b] : a < b; });
  tokens.resize(n);
  return tokens;
}

TokenDistribution apply_temperature(const TokenDistribution& dist, double temperature) {
  if (temperature < 0.0 || std::isnan(temperature)) {
    throw std::invalid_argument("temperature must be non-negative");
  }
  if (temperature == 1.0) return dist;
  TokenDistribution out{std::vector<double>(dist.size(), 0.0)};
  if (temperature == 0.0) {
    out.probs[static_cast<std::size_t>(dist.argmax())] = 1.0;
    return out;
  }
  double max_log = -INFINITY;
  for (double p : dist.probs) {
    if (p > 0.0) max_log = std::max(max_log, std::log(p));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist.probs[i] > 0.0) {
      out.probs[i] = std::exp((std::log(dist.probs[i]) - max_log) / temperature);
      sum += out.probs[i];
    }
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

Token sample_token(const TokenDistribution& dist, double u) {
  double acc = 0.0;
  Token last_positive = -1;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist.probs[i] <= 0.0) continue;
    acc += dist.probs[i];
    last_positive = static_cast<Token>(i);
    if (u < acc) return last_positive;
  }
  if (last_positive < 0) throw std::invalid_argument("sample from all-zero distribution");
  return last_positive;
}

TokenDistribution synthetic_distribution(std::uint64_t seed, std::uint64_t salt, int vocab_size,
                                         std::span<const Token> context) {
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  const std::size_t window = std::min(context.size(), kContextWindow);
  std::uint64_t h = hash_combine(seed, salt);
  h = hash_combine(h, window);
  for (std::size_t i = context.size() - window; i < context.size(); ++i) {
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(context[i])));
  }
  SplitMix64 rng(h);
  std::vector<double> logits(static_cast<std::size_t>(vocab_size));
  for (double& z : logits) {
    double u1 = 1.0 - rng.uniform();  // (0, 1]
    double u2 = rng.uniform();
    z = kLogitScale * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double max_z = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - max_z);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return TokenDistribution{std::move(logits)};
}

TokenDistribution draft_next(const OracleConfig& config, std::span<const Token> context) {
  require_context(context);
  return synthetic_distribution(config.seed, kDraftSalt, config.vocab_size, context);
}

TokenDistribution base_next(const OracleConfig& config, std::span<const Token> context) {
  require_context(context);
  const double a = config.alignment;
  if (a < 0.0 || a > 1.0) throw std::invalid_argument("alignment must lie in [0, 1]");
  TokenDistribution draft = draft_next(config, context);
  if (a == 1.0) return draft;
  TokenDistribution indep =
      synthetic_distribution(config.seed, kIndependentSalt, config.vocab_size, context);
  if (a == 0.0) return indep;
  for (std::size_t i = 0; i < draft.size(); ++i) {
    draft.probs[i] = a * draft.probs[i] + (1.0 - a) * indep.probs[i];
  }
  return draft;
}

std::vector<Token> autoregressive_greedy(const TokenModel& base, std::span<const Token> prompt,
                                         int gen_limit, Token eos_token) {
  std::vector<Token> context(prompt.begin(), prompt.end());
  std::vector<Token> out;
  for (int i = 0; i < gen_limit; ++i) {
    Token t = base.next(context).argmax();
    out.push_back(t);
    context.push_back(t);
    if (eos_token >= 0 && t == eos_token) break;
  }
  return out;
}

}  // namespace flowspec
