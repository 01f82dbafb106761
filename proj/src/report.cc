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

#include "flowspec/report.h"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "flowspec/strategies.h"

namespace flowspec {

RunResult run_config(const RunConfig& config) {
  OracleConfig oracle = config.oracle;
  oracle.temperature = config.params.temperature;
  SyntheticDraftModel draft(oracle);
  SyntheticBaseModel base(oracle);
  std::vector<Token> prompt = make_prompt(config.prompt, oracle.vocab_size);
  return run_strategy(config.strategy, prompt, draft, base, config.cost, config.params);
}

std::string trace_header_line(const RunConfig& config) {
  nlohmann::ordered_json sections = nlohmann::ordered_json::object();
  std::istringstream in(to_config_text(config));
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      sections[section] = nlohmann::ordered_json::object();
      continue;
    }
    auto eq = line.find(" = ");
    sections[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  nlohmann::ordered_json header;
  header["schema"] = kTraceSchema;
  header["config"] = std::move(sections);
  return header.dump();
}

void emit_trace(const RunResult& result, const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file " + path);
  out << trace_header_line(config) << "\n";
  for (const auto& e : result.trace) out << to_json_line(e) << "\n";
  if (!out) throw std::runtime_error("failed writing trace file " + path);
}

std::vector<TraceEvent> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  std::vector<TraceEvent> events;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      auto j = nlohmann::json::parse(line);
      if (j.contains("schema")) {
        if (j["schema"] != kTraceSchema) throw std::runtime_error("unsupported trace schema");
        continue;
      }
    }
    events.push_back(parse_trace_line(line));
  }
  return events;
}

RunConfig variant_for(const RunConfig& config, int seed_offset, int prompt_offset) {
  RunConfig c = config;
  c.params.seed += static_cast<std::uint64_t>(seed_offset);
  c.oracle.seed += static_cast<std::uint64_t>(seed_offset);
  c.prompt.seed += static_cast<std::uint64_t>(prompt_offset);
  return c;
}

std::vector<CompareRow> run_compare(const std::vector<RunConfig>& configs, int seeds, int prompts,
                                    int threads) {
  if (configs.empty()) return {};
  if (seeds < 1 || prompts < 1) throw std::invalid_argument("seeds and prompts must be positive");
  for (const auto& c : configs) {
    RunConfig same = c;
    same.strategy = configs.front().strategy;
    if (!(same == configs.front())) {
      throw std::invalid_argument("compared configs may differ only in strategy");
    }
  }

  // Slot 0 is the naive reference; slots 1.. follow `configs`.
  std::vector<RunConfig> slots;
  RunConfig naive = configs.front();
  naive.strategy = StrategyId::kNaivePP;
  slots.push_back(naive);
  slots.insert(slots.end(), configs.begin(), configs.end());

  struct Job {
    std::size_t slot;
    int seed;
    int prompt;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    for (int p = 0; p < prompts; ++p) {
      for (int r = 0; r < seeds; ++r) jobs.push_back({s, r, p});
    }
  }
  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& j = jobs[i];
      results[i] = run_config(variant_for(slots[j.slot], j.seed, j.prompt));
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const std::size_t per_slot = static_cast<std::size_t>(seeds * prompts);
  auto xi_of = [](const RunResult& r) { return r.metrics ? r.metrics->xi : 0.0; };
  auto latency_of = [](const RunResult& r) { return r.metrics ? r.metrics->latency_s : r.end_s; };

  std::vector<CompareRow> rows;
  for (std::size_t s = 1; s < slots.size(); ++s) {
    CompareRow row{slots[s].strategy};
    for (std::size_t i = 0; i < per_slot; ++i) {
      const RunResult& r = results[s * per_slot + i];
      const double ref = xi_of(results[i]);
      row.xi += xi_of(r);
      row.latency_s += latency_of(r);
      row.sr += ref > 0.0 ? xi_of(r) / ref : 0.0;
      row.rounds += static_cast<double>(r.rounds);
      row.steps += static_cast<double>(r.steps);
    }
    const double n = static_cast<double>(per_slot);
    row.xi /= n;
    row.latency_s /= n;
    row.sr /= n;
    row.rounds /= n;
    row.steps /= n;
    rows.push_back(row);
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "strategy,xi,latency_s,sr,rounds,steps\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  std::string(to_string(r.strategy)).c_str(), r.xi, r.latency_s, r.sr, r.rounds,
                  r.steps);
    out += buf;
  }
  return out;
}

std::string run_csv(const RunResult& result) {
  std::string out = "strategy,xi,latency_s,prefill_s,committed,rounds,steps,mean_accept_len\n";
  const Metrics m = result.metrics.value_or(Metrics{});
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%zu,%lld,%lld,%.6f\n",
                std::string(to_string(result.strategy)).c_str(), m.xi,
                result.metrics ? m.latency_s : result.end_s, result.prefill_s,
                result.committed.size(), static_cast<long long>(result.rounds),
                static_cast<long long>(result.steps), m.mean_accept_len);
  out += buf;
  return out;
}

}  // namespace flowspec
