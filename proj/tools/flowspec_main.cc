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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "flowspec/report.h"
#include "flowspec/run_config.h"

namespace {

using namespace flowspec;

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), process_env());
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<RunConfig> strategy_configs(const RunConfig& base, const std::vector<std::string>& names) {
  std::vector<RunConfig> out;
  for (const auto& name : names) {
    RunConfig c = base;
    c.strategy = strategy_from_string(name);
    out.push_back(c);
  }
  return out;
}

int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipeline-parallel tree speculative decoding simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_path;
  std::string out_path;
  std::vector<std::string> strategies{"naive_pp", "pruned_pp", "flowspec_no_sbd", "flowspec"};
  int seeds = 1;
  int prompts = 1;
  int threads = default_threads();
  std::string param;
  std::vector<std::string> values;

  auto* run = app.add_subcommand("run", "Simulate one configuration and print its metrics");
  run->add_option("config", config_path, "INI config file")->required();
  run->add_option("--trace", trace_path, "Write the JSONL event trace here");
  run->add_option("--out", out_path, "Write the metrics CSV here instead of stdout");

  auto* compare = app.add_subcommand("compare", "Compare strategies on the same workload");
  compare->add_option("config", config_path, "INI config file")->required();
  compare->add_option("--strategies", strategies, "Comma-separated strategy names")->delimiter(',');
  compare->add_option("--seeds", seeds, "Seeds per prompt")->check(CLI::PositiveNumber);
  compare->add_option("--prompts", prompts, "Synthetic prompts")->check(CLI::PositiveNumber);
  compare->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  compare->add_option("--out", out_path, "Write the CSV here instead of stdout");

  auto* sweep = app.add_subcommand("sweep", "Vary one config key and compare strategies");
  sweep->add_option("config", config_path, "INI config file")->required();
  sweep->add_option("--param", param, "Key to vary, as section.key")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--strategies", strategies, "Comma-separated strategy names")->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds per prompt")->check(CLI::PositiveNumber);
  sweep->add_option("--prompts", prompts, "Synthetic prompts")->check(CLI::PositiveNumber);
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_path, "Write the CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  std::fputs("note: xi and latency are in simulated seconds\n", stderr);
  try {
    RunConfig config = load_config(config_path);
    if (run->parsed()) {
      RunResult result = run_config(config);
      if (!trace_path.empty()) emit_trace(result, config, trace_path);
      write_output(run_csv(result), out_path);
    } else if (compare->parsed()) {
      auto rows = run_compare(strategy_configs(config, strategies), seeds, prompts, threads);
      write_output(compare_csv(rows), out_path);
    } else if (sweep->parsed()) {
      std::string text = "param,value,strategy,xi,latency_s,sr,rounds,steps\n";
      for (const auto& value : values) {
        RunConfig varied = with_override(config, param, value);
        auto rows = run_compare(strategy_configs(varied, strategies), seeds, prompts, threads);
        std::istringstream csv(compare_csv(rows));
        std::string line;
        std::getline(csv, line);
        while (std::getline(csv, line)) text += param + "," + value + "," + line + "\n";
      }
      write_output(text, out_path);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
