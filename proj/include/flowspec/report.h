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

#include <string>
#include <vector>

#include "flowspec/pipeline_sim.h"
#include "flowspec/run_config.h"

namespace flowspec {

RunResult run_config(const RunConfig& config);

/// Header line {"schema":"flowspec-trace/1","config":{...}} followed by one
/// line per event. Throws std::runtime_error carrying the path on I/O failure.
void emit_trace(const RunResult& result, const RunConfig& config, const std::string& path);
std::string trace_header_line(const RunConfig& config);

/// Reads a trace file written by emit_trace (header line skipped).
std::vector<TraceEvent> read_trace(const std::string& path);

struct CompareRow {
  StrategyId strategy;
  double xi = 0.0;
  double latency_s = 0.0;
  double sr = 0.0;
  double rounds = 0.0;
  double steps = 0.0;
};

/// Runs every config (which must differ only in strategy) over `seeds`
/// seed offsets and `prompts` synthetic prompts, and averages per strategy.
/// SR is the mean over (prompt, seed) pairs of xi / xi(NAIVE_PP); Naive PP
/// is run for the denominator even when not requested.
std::vector<CompareRow> run_compare(const std::vector<RunConfig>& configs, int seeds = 1,
                                    int prompts = 1, int threads = 1);

/// Config for the (seed, prompt) pair used by run_compare.
RunConfig variant_for(const RunConfig& config, int seed_offset, int prompt_offset);

std::string compare_csv(const std::vector<CompareRow>& rows);
std::string run_csv(const RunResult& result);

}  // namespace flowspec
