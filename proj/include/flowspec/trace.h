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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "flowspec/token_tree.h"

namespace flowspec {

inline constexpr std::string_view kTraceSchema = "flowspec-trace/1";

enum class EventKind {
  kSegmentIn,     // segment created at D0 and queued for V1
  kComputeDone,   // stage finished (or abandoned) a forward pass
  kTransferDone,  // link delivered a segment to `stage`
  kPruneMsg,      // pruning sent by D0 (stage 0) or applied at a stage
  kEvalDone,      // D0 evaluated verification output / prefill result
  kRoundStart,
  kRoundExit,
  kExpand,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct TraceEvent {
  double t = 0.0;
  EventKind kind = EventKind::kRoundStart;
  int stage = 0;
  std::optional<SegmentId> seg_id;
  std::int64_t n_tokens = 0;
  nlohmann::ordered_json detail = nlohmann::ordered_json::object();
};

/// One JSON object, keys in the order {t, kind, stage, seg_id, n_tokens, detail}.
std::string to_json_line(const TraceEvent& event);
TraceEvent parse_trace_line(const std::string& line);

struct Metrics {
  double xi = 0.0;              // decode tokens per simulated decode second
  double latency_s = 0.0;       // prefill + decode
  double prefill_s = 0.0;
  double decode_s = 0.0;
  std::int64_t committed = 0;   // tokens committed during decode
  std::int64_t rounds = 0;
  std::int64_t steps = 0;
  double mean_accept_len = 0.0; // committed / steps
  std::vector<double> stage_busy_fraction;  // V1..VN over latency_s

  bool operator==(const Metrics&) const = default;
};

/// Derives every metric from the event stream alone. Throws
/// std::invalid_argument when there is no decode time to divide by.
Metrics collect_metrics(std::span<const TraceEvent> trace);

}  // namespace flowspec
