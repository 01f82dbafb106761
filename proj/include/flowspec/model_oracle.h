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
#include <span>
#include <vector>

#include "flowspec/common.h"

namespace flowspec {

/// Next-token probabilities over a vocabulary.
struct TokenDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](Token t) const { return probs[static_cast<std::size_t>(t)]; }
  /// Most likely token; ties go to the lowest token id.
  Token argmax() const;
  /// True if entries are non-negative and sum to 1 within `tol`.
  bool is_normalized(double tol = 1e-9) const;
  bool operator==(const TokenDistribution&) const = default;
};

/// The `k` most likely tokens, by probability then token id.
std::vector<Token> top_k_tokens(const TokenDistribution& dist, int k);

/// Temperature 0 gives a one-hot at the argmax, 1 is the identity, anything
/// else re-normalizes p^(1/T). Negative temperatures are rejected.
TokenDistribution apply_temperature(const TokenDistribution& dist, double temperature);

/// Draws a token from `dist` using one uniform variate.
Token sample_token(const TokenDistribution& dist, double u);

struct OracleConfig {
  int vocab_size = 64;
  std::uint64_t seed = 0;
  // 1 = base distribution equals the draft distribution, 0 = independent.
  double alignment = 0.8;
  double temperature = 0.0;

  bool operator==(const OracleConfig&) const = default;
};

// Only the last kContextWindow tokens of a context influence the synthetic
// distributions.
inline constexpr std::size_t kContextWindow = 8;

// Gaussian logits are scaled by this before the softmax.
inline constexpr double kLogitScale = 2.0;

/// Deterministic pseudo-random distribution for a context window. The window
/// (plus its length, the seed and `salt`) is hashed into a SplitMix64 stream,
/// each vocabulary entry gets a Box-Muller normal z, and p ∝ exp(kLogitScale·z).
TokenDistribution synthetic_distribution(std::uint64_t seed, std::uint64_t salt,
                                         int vocab_size, std::span<const Token> context);

/// Draft-model stand-in. Throws std::invalid_argument on an empty context.
TokenDistribution draft_next(const OracleConfig& config, std::span<const Token> context);

/// Base-model stand-in: alignment·draft + (1-alignment)·independent.
TokenDistribution base_next(const OracleConfig& config, std::span<const Token> context);

/// Anything that maps a context to a next-token distribution.
class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual int vocab_size() const = 0;
  virtual TokenDistribution next(std::span<const Token> context) const = 0;
};

class SyntheticDraftModel final : public TokenModel {
 public:
  explicit SyntheticDraftModel(OracleConfig config) : config_(config) {}
  int vocab_size() const override { return config_.vocab_size; }
  TokenDistribution next(std::span<const Token> context) const override {
    return draft_next(config_, context);
  }

 private:
  OracleConfig config_;
};

class SyntheticBaseModel final : public TokenModel {
 public:
  explicit SyntheticBaseModel(OracleConfig config) : config_(config) {}
  int vocab_size() const override { return config_.vocab_size; }
  TokenDistribution next(std::span<const Token> context) const override {
    return base_next(config_, context);
  }

 private:
  OracleConfig config_;
};

/// Greedy autoregressive decoding with `base`: the reference every lossless
/// strategy must reproduce at temperature 0.
std::vector<Token> autoregressive_greedy(const TokenModel& base, std::span<const Token> prompt,
                                         int gen_limit, Token eos_token = -1);

}  // namespace flowspec
