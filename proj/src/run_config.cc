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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace flowspec {

namespace {

// Flat view of a config: cost is uniform across stages and links.
struct Draft {
  RunConfig config;
  StageCost stage;
  LinkCost link;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    throw ConfigError(key, "invalid number '" + text + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Token> parse_tokens(const std::string& key, const std::string& text) {
  std::vector<Token> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number<Token>(key, item));
  }
  return out;
}

struct Field {
  const char* section;
  const char* name;
  void (*set)(Draft&, const std::string& key, const std::string& value);
  std::string (*get)(const Draft&);
};

#define FS_INT_FIELD(sec, nm, expr)                                                   \
  Field {                                                                             \
    sec, #nm, [](Draft& d, const std::string& k, const std::string& v) {              \
      expr = parse_number<std::remove_reference_t<decltype(expr)>>(k, v);             \
    },                                                                                \
        [](const Draft& d) { return std::to_string(expr); }                          \
  }

#define FS_REAL_FIELD(sec, nm, expr)                                                  \
  Field {                                                                             \
    sec, #nm, [](Draft& d, const std::string& k, const std::string& v) {              \
      expr = parse_number<double>(k, v);                                              \
    },                                                                                \
        [](const Draft& d) { return format_double(expr); }                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FS_INT_FIELD("oracle", vocab_size, d.config.oracle.vocab_size),
      FS_INT_FIELD("oracle", seed, d.config.oracle.seed),
      FS_REAL_FIELD("oracle", alignment, d.config.oracle.alignment),

      FS_REAL_FIELD("cost", stage_base_s, d.stage.base_s),
      FS_REAL_FIELD("cost", stage_per_token_s, d.stage.per_token_s),
      FS_REAL_FIELD("cost", link_latency_s, d.link.latency_s),
      FS_REAL_FIELD("cost", link_bytes_per_s, d.link.bytes_per_s),
      FS_REAL_FIELD("cost", link_token_bytes, d.link.per_token_bytes),
      FS_REAL_FIELD("cost", draft_base_s, d.config.cost.draft.base_s),
      FS_REAL_FIELD("cost", draft_per_layer_s, d.config.cost.draft.per_layer_s),
      FS_REAL_FIELD("cost", d0_eval_s, d.config.cost.d0_eval_s),
      FS_REAL_FIELD("cost", prune_bytes_per_position, d.config.cost.prune_bytes_per_position),

      Field{"params", "strategy",
            [](Draft& d, const std::string& k, const std::string& v) {
              try {
                d.config.strategy = strategy_from_string(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(k, e.what());
              }
            },
            [](const Draft& d) { return std::string(to_string(d.config.strategy)); }},
      FS_INT_FIELD("params", N, d.config.params.N),
      FS_INT_FIELD("params", L, d.config.params.L),
      FS_INT_FIELD("params", d0, d.config.params.d0),
      FS_INT_FIELD("params", k, d.config.params.k),
      FS_INT_FIELD("params", L_max, d.config.params.L_max),
      Field{"params", "L_exp",
            [](Draft& d, const std::string& k, const std::string& v) {
              d.config.params.expansion.L_exp =
                  lower(v) == "all" ? kExpandAll : parse_number<int>(k, v);
            },
            [](const Draft& d) {
              return d.config.params.expansion.expands_all()
                         ? std::string("all")
                         : std::to_string(d.config.params.expansion.L_exp);
            }},
      FS_INT_FIELD("params", d_exp, d.config.params.expansion.d_exp),
      FS_INT_FIELD("params", d_se, d.config.params.expansion.d_se),
      FS_INT_FIELD("params", L_se, d.config.params.expansion.L_se),
      FS_REAL_FIELD("params", temperature, d.config.params.temperature),
      FS_INT_FIELD("params", gen_limit, d.config.params.gen_limit),
      FS_INT_FIELD("params", eos_token, d.config.params.eos_token),
      FS_INT_FIELD("params", seed, d.config.params.seed),

      Field{"prompt", "tokens",
            [](Draft& d, const std::string& k, const std::string& v) {
              d.config.prompt.tokens = parse_tokens(k, v);
            },
            [](const Draft& d) {
              std::string out;
              for (std::size_t i = 0; i < d.config.prompt.tokens.size(); ++i) {
                if (i) out += ",";
                out += std::to_string(d.config.prompt.tokens[i]);
              }
              return out;
            }},
      FS_INT_FIELD("prompt", length, d.config.prompt.length),
      FS_INT_FIELD("prompt", seed, d.config.prompt.seed),
  };
  return table;
}

#undef FS_INT_FIELD
#undef FS_REAL_FIELD

const Field* find_field(const std::string& section, const std::string& name) {
  for (const auto& f : fields()) {
    if (section == f.section && name == f.name) return &f;
  }
  return nullptr;
}

Draft flatten(const RunConfig& config) {
  Draft d{config, {}, {}};
  if (!config.cost.stages.empty()) d.stage = config.cost.stages.front();
  if (!config.cost.links.empty()) d.link = config.cost.links.front();
  return d;
}

RunConfig finish(Draft d) {
  RunConfig& c = d.config;
  c.oracle.temperature = c.params.temperature;
  CostModel cost = CostModel::uniform(std::max(c.params.N, 0), d.stage, d.link, c.cost.draft,
                                      c.cost.d0_eval_s);
  cost.prune_bytes_per_position = c.cost.prune_bytes_per_position;
  c.cost = std::move(cost);

  try {
    c.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("params", e.what());
  }
  if (c.oracle.vocab_size < 2) throw ConfigError("oracle.vocab_size", "must be at least 2");
  if (!(c.oracle.alignment >= 0.0 && c.oracle.alignment <= 1.0)) {
    throw ConfigError("oracle.alignment", "must lie in [0, 1]");
  }
  if (!c.cost.valid_for(c.params.N)) throw ConfigError("cost", "negative cost or zero bandwidth");
  if (c.prompt.tokens.empty() && c.prompt.length < 1) {
    throw ConfigError("prompt.length", "must be at least 1");
  }
  for (Token t : c.prompt.tokens) {
    if (t < 0 || t >= c.oracle.vocab_size) {
      throw ConfigError("prompt.tokens", "token " + std::to_string(t) + " outside vocabulary");
    }
  }
  if (c.params.eos_token >= c.oracle.vocab_size) {
    throw ConfigError("params.eos_token", "outside vocabulary");
  }
  return c;
}

using Overrides = std::map<std::string, std::string>;

RunConfig build(const std::string& text, const EnvLookup& env, const Overrides& overrides) {
  Draft d = flatten(RunConfig{});
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": bad section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = std::any_of(fields().begin(), fields().end(),
                               [&](const Field& f) { return section == f.section; });
      if (!known) throw ConfigError(section, "unknown section");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string name = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(name, "key outside any section");
    std::string key = section + "." + name;
    const Field* f = find_field(section, name);
    if (!f) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");
    f->set(d, key, value);
  }
  for (const auto& f : fields()) {
    std::string key = std::string(f.section) + "." + f.name;
    if (env) {
      if (auto v = env(env_var_name(f.section, f.name))) f.set(d, key, trim(*v));
    }
  }
  for (const auto& [key, value] : overrides) {
    auto dot = key.find('.');
    const Field* f = nullptr;
    if (dot != std::string::npos) {
      f = find_field(key.substr(0, dot), key.substr(dot + 1));
    } else {
      for (const auto& cand : fields()) {
        if (key != cand.name) continue;
        if (f) throw ConfigError(key, "ambiguous key, qualify it with a section");
        f = &cand;
      }
    }
    if (!f) throw ConfigError(key, "unknown key");
    f->set(d, std::string(f->section) + "." + f->name, value);
  }
  return finish(std::move(d));
}

}  // namespace

std::string env_var_name(const std::string& section, const std::string& key) {
  std::string out = "FLOWSPEC_" + section + "_" + key;
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

RunConfig parse_config(const std::string& text, const EnvLookup& env) {
  return build(text, env, {});
}

std::string to_config_text(const RunConfig& config) {
  Draft d = flatten(config);
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    if (std::string_view(f.section) == "prompt" && std::string_view(f.name) == "tokens" &&
        config.prompt.tokens.empty()) {
      continue;
    }
    out += std::string(f.name) + " = " + f.get(d) + "\n";
  }
  return out;
}

RunConfig with_override(const RunConfig& config, const std::string& key, const std::string& value) {
  return build(to_config_text(config), {}, Overrides{{key, value}});
}

std::vector<Token> make_prompt(const PromptSpec& spec, int vocab_size) {
  if (vocab_size < 1) throw std::invalid_argument("make_prompt: empty vocabulary");
  if (!spec.tokens.empty()) return spec.tokens;
  if (spec.length < 1) throw std::invalid_argument("make_prompt: length must be positive");
  SplitMix64 rng(hash_combine(spec.seed, 0x70726F6D7074ULL));
  std::vector<Token> out(static_cast<std::size_t>(spec.length));
  for (Token& t : out) t = static_cast<Token>(rng.next() % static_cast<std::uint64_t>(vocab_size));
  return out;
}

}  // namespace flowspec
