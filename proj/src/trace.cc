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

#include "flowspec/trace.h"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <utility>

namespace flowspec {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 8> kKindNames{{
    {EventKind::kSegmentIn, "SEGMENT_IN"},
    {EventKind::kComputeDone, "COMPUTE_DONE"},
    {EventKind::kTransferDone, "TRANSFER_DONE"},
    {EventKind::kPruneMsg, "PRUNE_MSG"},
    {EventKind::kEvalDone, "EVAL_DONE"},
    {EventKind::kRoundStart, "ROUND_START"},
    {EventKind::kRoundExit, "ROUND_EXIT"},
    {EventKind::kExpand, "EXPAND"},
}};

bool in_phase(const TraceEvent& e, std::string_view phase) {
  auto it = e.detail.find("phase");
  return it != e.detail.end() && it->is_string() && it->get<std::string>() == phase;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (auto [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "UNKNOWN";
}

EventKind event_kind_from_string(std::string_view name) {
  for (auto [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown trace event kind '" + std::string(name) + "'");
}

std::string to_json_line(const TraceEvent& event) {
  nlohmann::ordered_json j;
  j["t"] = event.t;
  j["kind"] = to_string(event.kind);
  j["stage"] = event.stage;
  if (event.seg_id) {
    j["seg_id"] = to_string(*event.seg_id);
  } else {
    j["seg_id"] = nullptr;
  }
  j["n_tokens"] = event.n_tokens;
  j["detail"] = event.detail;
  return j.dump();
}

TraceEvent parse_trace_line(const std::string& line) {
  auto j = nlohmann::ordered_json::parse(line);
  TraceEvent e;
  e.t = j.at("t").get<double>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.stage = j.at("stage").get<int>();
  if (!j.at("seg_id").is_null()) {
    auto s = j.at("seg_id").get<std::string>();
    auto dot = s.find('.');
    if (dot == std::string::npos) throw std::invalid_argument("malformed seg_id '" + s + "'");
    e.seg_id = SegmentId{std::stoi(s.substr(0, dot)), std::stoi(s.substr(dot + 1))};
  }
  e.n_tokens = j.at("n_tokens").get<std::int64_t>();
  e.detail = j.at("detail");
  return e;
}

Metrics collect_metrics(std::span<const TraceEvent> trace) {
  Metrics m;
  int stages = 0;
  bool have_prefill = false;
  double decode_end = 0.0;
  for (const auto& e : trace) {
    switch (e.kind) {
      case EventKind::kRoundStart:
        if (in_phase(e, "prefill") && e.detail.contains("stages")) {
          stages = e.detail["stages"].get<int>();
        } else if (in_phase(e, "decode")) {
          ++m.rounds;
        }
        break;
      case EventKind::kEvalDone:
        if (in_phase(e, "prefill")) {
          m.prefill_s = e.t;
          have_prefill = true;
        } else if (in_phase(e, "decode")) {
          ++m.steps;
          auto commit = e.detail.value("commit", std::int64_t{0});
          m.committed += commit;
          if (commit > 0) decode_end = std::max(decode_end, e.t);
        }
        break;
      case EventKind::kComputeDone:
        stages = std::max(stages, e.stage);
        break;
      default:
        break;
    }
  }
  if (!have_prefill) throw std::invalid_argument("collect_metrics: trace has no prefill result");
  m.decode_s = decode_end - m.prefill_s;
  if (m.committed == 0 || !(m.decode_s > 0.0)) {
    throw std::invalid_argument("collect_metrics: zero decode time");
  }
  m.latency_s = decode_end;
  m.xi = static_cast<double>(m.committed) / m.decode_s;
  m.mean_accept_len = m.steps > 0 ? static_cast<double>(m.committed) / static_cast<double>(m.steps) : 0.0;

  std::vector<double> busy(static_cast<std::size_t>(stages), 0.0);
  for (const auto& e : trace) {
    if (e.kind != EventKind::kComputeDone || e.stage < 1) continue;
    busy[static_cast<std::size_t>(e.stage - 1)] += e.t - e.detail.at("start").get<double>();
  }
  for (double b : busy) m.stage_busy_fraction.push_back(b / m.latency_s);
  return m;
}

}  // namespace flowspec
