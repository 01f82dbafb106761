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
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowspec/model_oracle.h"
#include "flowspec/pipeline_sim.h"

namespace flowspec {

/// Bad configuration input. `key()` names the offending "section.key" when
/// one is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct PromptSpec {
  std::vector<Token> tokens;  // explicit prompt; empty means synthetic
  int length = 64;
  std::uint64_t seed = 0;

  bool operator==(const PromptSpec&) const = default;
};

struct RunConfig {
  StrategyId strategy = StrategyId::kFlowSpec;
  OracleConfig oracle;
  CostModel cost = CostModel::desk_default(4);
  SimParams params;
  PromptSpec prompt;

  bool operator==(const RunConfig&) const = default;
};

/// Returns the value of an environment variable, if set.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Every key may be overridden by FLOWSPEC_<SECTION>_<KEY> (upper case),
/// e.g. FLOWSPEC_PARAMS_N=8 or FLOWSPEC_COST_LINK_LATENCY_S=0.01.
std::string env_var_name(const std::string& section, const std::string& key);
EnvLookup process_env();

/// Parses the INI-style document with sections [oracle], [cost], [params]
/// and [prompt]. Omitted keys take their defaults; unknown keys, malformed
/// values and out-of-range values raise ConfigError.
RunConfig parse_config(const std::string& text, const EnvLookup& env = {});

/// Canonical document that parses back to the same RunConfig.
std::string to_config_text(const RunConfig& config);

/// Sets one "section.key" (or unambiguous bare "key") to `value`, with the
/// same validation as parse_config.
RunConfig with_override(const RunConfig& config, const std::string& key, const std::string& value);

/// Seeded synthetic prompt of spec.length tokens, or the explicit tokens.
std::vector<Token> make_prompt(const PromptSpec& spec, int vocab_size);

}  // namespace flowspec
