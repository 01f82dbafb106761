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

#include "flowspec/pipeline_sim.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "flowspec/verifier.h"

namespace flowspec {

// ---------------------------------------------------------------------------
// Cost model and parameters

bool CostModel::valid_for(int N) const {
  if (static_cast<int>(stages.size()) != N || static_cast<int>(links.size()) != N + 1) return false;
  for (const auto& s : stages) {
    if (!(s.base_s >= 0.0 && s.per_token_s >= 0.0)) return false;
  }
  for (const auto& l : links) {
    if (!(l.latency_s >= 0.0 && l.bytes_per_s > 0.0 && l.per_token_bytes >= 0.0)) return false;
  }
  return draft.base_s >= 0.0 && draft.per_layer_s >= 0.0 && d0_eval_s >= 0.0 &&
         prune_bytes_per_position >= 0.0;
}

CostModel CostModel::uniform(int N, StageCost stage, LinkCost link, DraftCost draft, double d0_eval_s) {
  CostModel m;
  m.stages.assign(static_cast<std::size_t>(N), stage);
  m.links.assign(static_cast<std::size_t>(N + 1), link);
  m.draft = draft;
  m.d0_eval_s = d0_eval_s;
  return m;
}

CostModel CostModel::desk_default(int N) {
  return uniform(N, StageCost{0.042, 0.0005}, LinkCost{0.002, 1.25e7, 8192.0},
                 DraftCost{0.005, 0.004}, 0.002);
}

CostModel CostModel::zero(int N) {
  return uniform(N, StageCost{}, LinkCost{0.0, INFINITY, 0.0}, DraftCost{}, 0.0);
}

namespace {

constexpr std::array<std::pair<StrategyId, std::string_view>, 4> kStrategyNames{{
    {StrategyId::kNaivePP, "naive_pp"},
    {StrategyId::kPrunedPP, "pruned_pp"},
    {StrategyId::kFlowSpecNoSbd, "flowspec_no_sbd"},
    {StrategyId::kFlowSpec, "flowspec"},
}};

}  // namespace

std::string_view to_string(StrategyId id) {
  for (auto [s, name] : kStrategyNames) {
    if (s == id) return name;
  }
  return "unknown";
}

StrategyId strategy_from_string(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto [s, n] : kStrategyNames) {
    if (n == lower) return s;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

void SimParams::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw std::invalid_argument(std::string(field) + " out of range");
  };
  require(N >= 1, "N");
  require(L >= 1, "L");
  require(d0 >= 1, "d0");
  require(k >= 1, "k");
  require(L_max >= 1, "L_max");
  require(expansion.L_exp == kExpandAll || expansion.L_exp >= 1, "L_exp");
  require(expansion.d_exp >= 1, "d_exp");
  require(expansion.d_se >= 1, "d_se");
  require(expansion.L_se >= 1, "L_se");
  require(temperature >= 0.0, "temperature");
  require(gen_limit >= 0, "gen_limit");
}

StrategyFlags StrategyFlags::for_strategy(StrategyId id) {
  switch (id) {
    case StrategyId::kNaivePP:
      return {false, false, false, SequenceOrder::kScore};
    case StrategyId::kPrunedPP:
      return {true, true, false, SequenceOrder::kScore};
    case StrategyId::kFlowSpecNoSbd:
      return {true, true, true, SequenceOrder::kBreadthFirst};
    case StrategyId::kFlowSpec:
      return {true, true, true, SequenceOrder::kScore};
  }
  throw std::invalid_argument("unknown strategy");
}

std::optional<double> dispatch_segment(const DraftSegment& segment, double now, const LinkCost& link) {
  if (segment.empty()) return std::nullopt;
  return now + link.segment_s(segment.size());
}

double stage_compute(double now, double busy_until, const StageCost& cost, std::size_t tokens) {
  return std::max(now, busy_until) + cost.compute_s(tokens);
}

// ---------------------------------------------------------------------------
// Simulator

namespace {

struct Flight {
  std::uint64_t id = 0;
  DraftSegment segment;
  int round = 0;
  bool prefill = false;
  bool last_prefill = false;
  std::int64_t applied_epoch = 0;
};

enum class Ev { kArriveStage, kComputeDone, kArriveD0, kEvalDone, kPruneArrive, kDraftReady };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  Ev kind = Ev::kArriveStage;
  int stage = 0;
  std::uint64_t flight = 0;
  int round = 0;
  std::int64_t epoch = 0;
};

struct LaterFirst {
  bool operator()(const Event& a, const Event& b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

struct Stage {
  KvCacheIndex kv;
  std::deque<Flight> inbox;
  std::optional<Flight> computing;
  double busy_until = 0.0;
  double compute_start = 0.0;
  std::int64_t applied_epoch = 0;
  std::optional<PruneMessage> latest;
};

// Links deliver in FIFO order: a transfer never overtakes an earlier one on
// the same channel.
struct Channel {
  double last_arrival = 0.0;

  double deliver(double arrival) {
    last_arrival = std::max(arrival, last_arrival);
    return last_arrival;
  }
};

nlohmann::ordered_json positions_json(const DraftSegment& seg) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& e : seg.entries) j.push_back(e.position);
  return j;
}

class Simulator {
 public:
  Simulator(StrategyId strategy, std::span<const Token> prompt, const TokenModel& draft,
            const TokenModel& base, const CostModel& cost, const SimParams& params,
            SimObserver* observer)
      : strategy_(strategy),
        flags_(StrategyFlags::for_strategy(strategy)),
        draft_(draft),
        base_model_(base),
        cost_(cost),
        params_(params),
        observer_(observer),
        prompt_(prompt.begin(), prompt.end()),
        history_(prompt.begin(), prompt.end()),
        stages_(static_cast<std::size_t>(params.N)),
        links_(static_cast<std::size_t>(params.N + 1)),
        control_(static_cast<std::size_t>(params.N)) {
    params_.validate();
    if (prompt_.empty()) throw std::invalid_argument("prompt must be nonempty");
    if (!cost_.valid_for(params_.N)) {
      throw std::invalid_argument("cost model does not match N = " + std::to_string(params_.N));
    }
    mode_ = params_.temperature == 0.0 ? SamplingMode::kGreedy : SamplingMode::kStochastic;
  }

  RunResult run(bool prefill_only = false) {
    prefill_only_ = prefill_only;
    start_prefill();
    while (!finished_) {
      if (queue_.empty()) throw std::logic_error("simulation stalled with no pending events");
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      dispatch(ev);
    }
    RunResult result;
    result.strategy = strategy_;
    result.committed = committed_;
    result.prefill_s = prefill_s_;
    result.end_s = end_s_;
    result.rounds = rounds_;
    result.steps = steps_;
    result.trace = std::move(trace_);
    try {
      result.metrics = collect_metrics(result.trace);
    } catch (const std::invalid_argument&) {
      result.metrics.reset();
    }
    return result;
  }

  Token first_token() const { return first_token_; }
  std::vector<KvCacheIndex> caches() const {
    std::vector<KvCacheIndex> out;
    for (const auto& s : stages_) out.push_back(s.kv);
    return out;
  }

 private:
  int N() const { return params_.N; }
  Stage& stage(int n) { return stages_[static_cast<std::size_t>(n - 1)]; }

  void push(Ev kind, double time, int stage_id = 0, std::uint64_t flight = 0, std::int64_t epoch = 0) {
    queue_.push(Event{time, next_seq_++, kind, stage_id, flight, round_, epoch});
  }

  void record(EventKind kind, int stage_id, std::optional<SegmentId> seg, std::int64_t n_tokens,
              nlohmann::ordered_json detail = nlohmann::ordered_json::object()) {
    TraceEvent e{now_, kind, stage_id, seg, n_tokens, std::move(detail)};
    if (observer_) observer_->on_event(e);
    trace_.push_back(std::move(e));
  }

  std::vector<Token> context_before_root() const {
    return std::vector<Token>(history_.begin(), history_.end() - 1);
  }

  // -- prefill --------------------------------------------------------------

  void start_prefill() {
    record(EventKind::kRoundStart, 0, std::nullopt, static_cast<std::int64_t>(prompt_.size()),
           {{"phase", "prefill"}, {"stages", N()}});
    const std::size_t chunk = static_cast<std::size_t>(params_.L_max);
    int ordinal = 0;
    for (std::size_t begin = 0; begin < prompt_.size(); begin += chunk) {
      std::size_t end = std::min(prompt_.size(), begin + chunk);
      Flight f;
      f.id = next_flight_++;
      f.segment.id = SegmentId{0, ordinal++};
      for (std::size_t i = begin; i < end; ++i) {
        auto p = static_cast<Position>(i);
        f.segment.entries.push_back({prompt_[i], p, p, {}});
      }
      f.round = 0;
      f.prefill = true;
      f.last_prefill = end == prompt_.size();
      record(EventKind::kSegmentIn, 0, f.segment.id, static_cast<std::int64_t>(f.segment.size()),
             {{"phase", "prefill"}});
      pending_.push_back(std::move(f));
    }
    try_dispatch();
  }

  void finish_prefill() {
    prefill_s_ = now_;
    TokenDistribution dist = base_model_.next(history_);
    if (mode_ == SamplingMode::kGreedy) {
      first_token_ = dist.argmax();
    } else {
      SplitMix64 rng(hash_combine(params_.seed, 0x9F5EEDULL));
      first_token_ = sample_token(apply_temperature(dist, params_.temperature), rng.uniform());
    }
    l_glo_ = static_cast<Position>(prompt_.size());
    std::int64_t commit = 0;
    if (!prefill_only_ && params_.gen_limit > 0) {
      commit = commit_tokens({first_token_});
    }
    record(EventKind::kEvalDone, 0, std::nullopt, 1,
           {{"phase", "prefill"}, {"commit", commit}, {"x_new", first_token_}});
    end_s_ = now_;
    if (prefill_only_ || params_.gen_limit == 0 || done_) {
      finished_ = true;
      return;
    }
    d0_busy_ = true;
    start_round();
  }

  // Appends tokens to the output, honoring gen_limit and EOS. Returns how many
  // were committed.
  std::int64_t commit_tokens(const std::vector<Token>& tokens) {
    std::int64_t n = 0;
    for (Token t : tokens) {
      if (static_cast<int>(committed_.size()) >= params_.gen_limit) break;
      committed_.push_back(t);
      history_.push_back(t);
      ++n;
      if (params_.eos_token >= 0 && t == params_.eos_token) {
        done_ = true;
        break;
      }
    }
    if (static_cast<int>(committed_.size()) >= params_.gen_limit) done_ = true;
    return n;
  }

  // -- rounds ---------------------------------------------------------------

  void start_round() {
    ++round_;
    ++rounds_;
    ordinal_ = 0;
    counters_ = {};
    available_.clear();
    round_segments_ = 0;
    round_arrived_ = 0;
    naive_buffer_.clear();

    base_tree_ = grow_base_tree(draft_, context_before_root(), history_.back(), params_.d0, params_.k);
    auto selected = select_top_L(base_tree_, params_.L, flags_.order, l_glo_);
    tree_ = std::move(selected.tree);
    set_sequence(std::move(selected.sequence));
    next_position_ = l_glo_ + static_cast<Position>(seq_.size());
    counters_.generated = static_cast<std::int64_t>(tree_.size());

    record(EventKind::kRoundStart, 0, std::nullopt, static_cast<std::int64_t>(seq_.size()),
           {{"phase", "decode"}, {"round", round_}, {"l_glo", l_glo_},
            {"base_size", base_tree_.size()}});
    stage_segments(segment_sequence(seq_, static_cast<std::size_t>(params_.L_max), 0,
                                    SegmentId{round_, 0}));
    push(Ev::kDraftReady, now_ + cost_.draft.growth_s(params_.d0));
  }

  void set_sequence(DraftSequence seq) {
    seq_ = std::move(seq);
    node_at_.clear();
    for (const auto& e : seq_.entries) node_at_.emplace(e.position, e.node);
    root_position_ = -1;
    for (const auto& e : seq_.entries) {
      if (e.node == tree_.root()) root_position_ = e.position;
    }
    std::erase_if(available_, [&](const auto& kv) { return !node_at_.contains(kv.first); });
  }

  void stage_segments(std::vector<DraftSegment> segments) {
    ordinal_ += static_cast<int>(segments.size());
    round_segments_ += static_cast<int>(segments.size());
    for (auto& seg : segments) {
      Flight f;
      f.id = next_flight_++;
      f.segment = std::move(seg);
      f.round = round_;
      f.applied_epoch = epoch_;
      ready_.push_back(std::move(f));
    }
  }

  void on_draft_ready(const Event& ev) {
    if (ev.round != round_) return;
    for (auto& f : ready_) {
      record(EventKind::kSegmentIn, 0, f.segment.id, static_cast<std::int64_t>(f.segment.size()),
             {{"phase", "decode"}, {"positions", positions_json(f.segment)}});
      pending_.push_back(std::move(f));
    }
    ready_.clear();
    d0_busy_ = false;
    try_dispatch();
    try_d0();
  }

  void exit_round(const VerificationOutcome& outcome) {
    const auto accepted = static_cast<std::int64_t>(outcome.accepted.size()) + 1;
    l_glo_ += accepted;
    counters_.accepted += accepted;
    counters_.discarded += static_cast<std::int64_t>(tree_.size()) - accepted;

    for (int n = 1; n <= N(); ++n) {
      Stage& s = stage(n);
      if (s.computing) {
        record(EventKind::kComputeDone, n, s.computing->segment.id, 0,
               {{"phase", "decode"}, {"start", s.compute_start}, {"cancelled", true},
                {"positions", nlohmann::ordered_json::array()}});
      }
      s.computing.reset();
      s.inbox.clear();
      s.busy_until = now_;
      s.kv.context_len = l_glo_;
      s.kv.draft_entries.clear();
      s.latest.reset();
      s.applied_epoch = epoch_;
    }
    for (auto& c : links_) c.last_arrival = now_;
    for (auto& c : control_) c.last_arrival = now_;
    std::erase_if(transit_, [](const auto& kv) { return !kv.second.prefill; });
    pending_.clear();
    ready_.clear();
    d0_queue_.clear();
    outstanding_.reset();

    record(EventKind::kRoundExit, 0, std::nullopt, accepted,
           {{"round", round_}, {"l_glo", l_glo_}, {"x_new", outcome.new_token},
            {"discarded", counters_.discarded}});
  }

  // -- D0 -> V1 dispatch ----------------------------------------------------

  void try_dispatch() {
    while (!outstanding_ && !pending_.empty()) {
      Flight f = std::move(pending_.front());
      pending_.pop_front();
      auto arrival = dispatch_segment(f.segment, now_, cost_.links[0]);
      if (!arrival) continue;
      outstanding_ = f.id;
      send(std::move(f), 0, *arrival);
    }
  }

  // Puts a flight on links_[link] (link n leaves stage n; link N ends at D0).
  void send(Flight f, int link, double arrival) {
    double t = links_[static_cast<std::size_t>(link)].deliver(arrival);
    std::uint64_t id = f.id;
    transit_.emplace(id, std::move(f));
    if (link == N()) {
      push(Ev::kArriveD0, t, 0, id);
    } else {
      push(Ev::kArriveStage, t, link + 1, id);
    }
  }

  void consumed_at_v1(std::uint64_t id) {
    if (outstanding_ && *outstanding_ == id) {
      outstanding_.reset();
      try_dispatch();
    }
  }

  // -- verification stages --------------------------------------------------

  // Brings a flight up to date with the newest prune the stage has seen.
  void refresh(Stage& s, Flight& f) {
    if (f.prefill || !s.latest || s.latest->epoch <= f.applied_epoch) return;
    f.segment = prune_segment(f.segment, *s.latest);
    f.applied_epoch = s.latest->epoch;
  }

  void drop(int n, const Flight& f) {
    record(EventKind::kPruneMsg, n, f.segment.id, 0, {{"dropped", true}, {"epoch", f.applied_epoch}});
    if (n == 1) consumed_at_v1(f.id);
  }

  void on_arrive_stage(const Event& ev) {
    auto it = transit_.find(ev.flight);
    if (it == transit_.end()) return;
    Flight f = std::move(it->second);
    transit_.erase(it);
    Stage& s = stage(ev.stage);
    record(EventKind::kTransferDone, ev.stage, f.segment.id, static_cast<std::int64_t>(f.segment.size()),
           {{"phase", f.prefill ? "prefill" : "decode"}});
    refresh(s, f);
    if (f.segment.empty()) {
      drop(ev.stage, f);
      return;
    }
    s.inbox.push_back(std::move(f));
    try_start(ev.stage);
  }

  void try_start(int n) {
    Stage& s = stage(n);
    if (s.computing || s.inbox.empty()) return;
    Flight f = std::move(s.inbox.front());
    s.inbox.pop_front();
    double done = stage_compute(now_, s.busy_until, cost_.stages[static_cast<std::size_t>(n - 1)],
                                f.segment.size());
    s.compute_start = std::max(now_, s.busy_until);
    s.busy_until = done;
    std::uint64_t id = f.id;
    s.computing = std::move(f);
    push(Ev::kComputeDone, done, n, id);
    if (n == 1) consumed_at_v1(id);
  }

  void on_compute_done(const Event& ev) {
    Stage& s = stage(ev.stage);
    if (!s.computing || s.computing->id != ev.flight) return;
    Flight f = std::move(*s.computing);
    s.computing.reset();
    refresh(s, f);

    nlohmann::ordered_json detail{{"phase", f.prefill ? "prefill" : "decode"},
                                  {"start", s.compute_start}};
    if (f.prefill) {
      s.kv.context_len += static_cast<Position>(f.segment.size());
    } else {
      auto positions = f.segment.positions();
      std::vector<Position> merged;
      std::set_union(s.kv.draft_entries.begin(), s.kv.draft_entries.end(), positions.begin(),
                     positions.end(), std::back_inserter(merged));
      s.kv.draft_entries = std::move(merged);
      detail["positions"] = positions_json(f.segment);
    }
    if (f.segment.empty()) detail["dropped"] = true;
    record(EventKind::kComputeDone, ev.stage, f.segment.id, static_cast<std::int64_t>(f.segment.size()),
           std::move(detail));

    if (!f.segment.empty()) {
      if (ev.stage < N()) {
        double arrival = now_ + cost_.links[static_cast<std::size_t>(ev.stage)].segment_s(f.segment.size());
        send(std::move(f), ev.stage, arrival);
      } else if (!f.prefill || f.last_prefill) {
        // Prefill only needs the distribution of the final prompt token.
        std::size_t tokens = f.prefill ? 1 : f.segment.size();
        double arrival = now_ + cost_.links[static_cast<std::size_t>(N())].segment_s(tokens);
        send(std::move(f), N(), arrival);
      }
    }
    try_start(ev.stage);
  }

  void on_prune_arrive(const Event& ev) {
    if (ev.round != round_) return;
    Stage& s = stage(ev.stage);
    if (ev.epoch <= s.applied_epoch) return;
    const PruneMessage& msg = messages_.at(ev.epoch);
    s.latest = msg;
    s.applied_epoch = msg.epoch;
    s.kv = prune_kv_cache(s.kv, msg);
    record(EventKind::kPruneMsg, ev.stage, std::nullopt,
           static_cast<std::int64_t>(msg.accepted.size() + msg.retained.size()),
           {{"epoch", msg.epoch}, {"applied", true}});
    std::deque<Flight> kept;
    for (auto& f : s.inbox) {
      refresh(s, f);
      if (f.segment.empty()) {
        drop(ev.stage, f);
      } else {
        kept.push_back(std::move(f));
      }
    }
    s.inbox = std::move(kept);
  }

  // -- draft stage ----------------------------------------------------------

  void on_arrive_d0(const Event& ev) {
    auto it = transit_.find(ev.flight);
    if (it == transit_.end()) return;
    Flight f = std::move(it->second);
    transit_.erase(it);
    record(EventKind::kTransferDone, 0, f.segment.id, static_cast<std::int64_t>(f.segment.size()),
           {{"phase", f.prefill ? "prefill" : "decode"}});
    if (f.prefill) {
      finish_prefill();
      return;
    }
    if (!flags_.stepwise) {
      naive_buffer_.push_back(std::move(f));
      if (++round_arrived_ < round_segments_) return;
      d0_queue_.push_back(std::move(naive_buffer_));
      naive_buffer_.clear();
    } else {
      d0_queue_.push_back({std::move(f)});
    }
    try_d0();
  }

  void try_d0() {
    if (d0_busy_ || d0_queue_.empty() || finished_) return;
    d0_busy_ = true;
    d0_job_ = std::move(d0_queue_.front());
    d0_queue_.pop_front();
    push(Ev::kEvalDone, now_ + cost_.d0_eval_s);
  }

  TokenDistribution base_at(NodeId node) {
    std::vector<Token> ctx = history_;
    auto path = tree_.path_tokens(node);
    ctx.insert(ctx.end(), path.begin(), path.end());
    return apply_temperature(base_model_.next(ctx), mode_ == SamplingMode::kGreedy ? 1.0 : params_.temperature);
  }

  TokenDistribution draft_at(NodeId node) {
    std::vector<Token> ctx = history_;
    auto path = tree_.path_tokens(node);
    ctx.insert(ctx.end(), path.begin(), path.end());
    return apply_temperature(draft_.next(ctx), params_.temperature);
  }

  void on_eval_done(const Event& ev) {
    if (ev.round != round_) {
      d0_busy_ = false;
      try_d0();
      return;
    }
    ++steps_;
    std::int64_t received = 0;
    std::int64_t valid = 0;
    std::optional<SegmentId> seg_id;
    for (auto& f : d0_job_) {
      seg_id = f.segment.id;
      for (const auto& e : f.segment.entries) {
        ++received;
        auto it = node_at_.find(e.position);
        if (it == node_at_.end()) continue;
        ++valid;
        available_.emplace(e.position, base_at(it->second));
      }
    }
    d0_job_.clear();

    nlohmann::ordered_json detail{{"phase", "decode"}, {"received", received}, {"valid", valid}};
    if (!available_.contains(root_position_)) {
      detail["commit"] = 0;
      detail["progress"] = false;
      record(EventKind::kEvalDone, 0, seg_id, valid, std::move(detail));
      if (flags_.expand) {
        score_expand_step();
      } else {
        d0_busy_ = false;
      }
      notify_step();
      if (!d0_busy_) try_d0();
      return;
    }

    VerificationOutput out;
    for (const auto& [pos, dist] : available_) out.per_token_dist.emplace(node_at_.at(pos), dist);
    DraftLookup lookup;
    if (mode_ == SamplingMode::kStochastic) {
      lookup = [this](NodeId id) { return draft_at(id); };
    }
    VerificationOutcome outcome =
        accept_walk(tree_, out, mode_, hash_combine(params_.seed, static_cast<std::uint64_t>(steps_)), lookup);

    std::vector<Token> tokens = outcome.accepted;
    tokens.push_back(outcome.new_token);
    std::int64_t commit = commit_tokens(tokens);
    detail["commit"] = commit;
    detail["progress"] = true;
    detail["accepted"] = outcome.accepted.size();
    detail["x_new"] = outcome.new_token;
    detail["continue"] = outcome.continue_round;
    record(EventKind::kEvalDone, 0, seg_id, valid, std::move(detail));

    if (done_) {
      end_s_ = now_;
      finished_ = true;
      notify_step();
      return;
    }
    if (!flags_.prune || should_exit_round(outcome)) {
      exit_round(outcome);
      start_round();
      notify_step();
      return;
    }
    prune_step(outcome);
    if (flags_.expand) {
      context_expand_step();
    } else {
      d0_busy_ = false;
    }
    notify_step();
    if (!d0_busy_) try_d0();
  }

  void prune_step(const VerificationOutcome& outcome) {
    const std::size_t before = tree_.size();
    PruneResult res = compute_prune(tree_, seq_, outcome, PruneContext{l_glo_, next_position_, epoch_ + 1});
    ++epoch_;
    const auto accepted = static_cast<std::int64_t>(res.message.accepted.size());
    counters_.accepted += accepted;
    counters_.pruned += static_cast<std::int64_t>(before - res.tree.size()) - accepted;
    l_glo_ = res.message.new_l_glo;
    tree_ = std::move(res.tree);
    set_sequence(std::move(res.sequence));

    const PruneMessage& msg = messages_.emplace(epoch_, std::move(res.message)).first->second;
    const double bytes = cost_.prune_bytes_per_position *
                         static_cast<double>(msg.accepted.size() + msg.retained.size());
    record(EventKind::kPruneMsg, 0, std::nullopt,
           static_cast<std::int64_t>(msg.accepted.size() + msg.retained.size()),
           {{"message", nlohmann::ordered_json::parse(msg.to_json())}});
    for (int n = 1; n <= N(); ++n) {
      double t = control_[static_cast<std::size_t>(n - 1)].deliver(now_ + cost_.links[0].transfer_s(bytes));
      push(Ev::kPruneArrive, t, n, 0, msg.epoch);
    }

    // Work still held at D0 is pruned locally.
    std::deque<Flight> kept;
    for (auto& f : pending_) {
      f.segment = prune_segment(f.segment, msg);
      f.applied_epoch = msg.epoch;
      if (!f.segment.empty()) kept.push_back(std::move(f));
    }
    pending_ = std::move(kept);
  }

  void context_expand_step() {
    const auto& cfg = params_.expansion;
    ContextExpansion exp = context_expand(tree_, seq_, context_before_root(), draft_, cfg, params_.k,
                                          params_.L, flags_.order, Placement{next_position_, l_glo_});
    const std::size_t appended = exp.appended;
    base_tree_ = std::move(exp.base);
    tree_ = std::move(exp.merged);
    set_sequence(std::move(exp.sequence));
    next_position_ += static_cast<Position>(appended);
    counters_.generated += static_cast<std::int64_t>(appended);
    const std::size_t max_len = cfg.expands_all() ? std::max<std::size_t>(appended, 1)
                                                  : static_cast<std::size_t>(params_.L_max);
    stage_segments(segment_sequence(seq_, max_len, seq_.size() - appended, SegmentId{round_, ordinal_}));
    record(EventKind::kExpand, 0, std::nullopt, static_cast<std::int64_t>(appended),
           {{"type", "context"}, {"tree_size", tree_.size()}, {"base_size", base_tree_.size()}});
    push(Ev::kDraftReady, now_ + cost_.draft.growth_s(cfg.d_exp));
  }

  void score_expand_step() {
    const auto& cfg = params_.expansion;
    ScoreExpansion exp = score_expand(tree_, seq_, base_tree_, context_before_root(), draft_, cfg,
                                      params_.k, flags_.order, Placement{next_position_, l_glo_});
    const std::size_t appended = exp.appended;
    tree_ = std::move(exp.tree);
    set_sequence(std::move(exp.sequence));
    next_position_ += static_cast<Position>(appended);
    counters_.generated += static_cast<std::int64_t>(appended);
    const std::size_t max_len = cfg.expands_all() ? std::max<std::size_t>(appended, 1)
                                                  : static_cast<std::size_t>(params_.L_max);
    stage_segments(segment_sequence(seq_, max_len, seq_.size() - appended, SegmentId{round_, ordinal_}));
    record(EventKind::kExpand, 0, std::nullopt, static_cast<std::int64_t>(appended),
           {{"type", "score"}, {"tree_size", tree_.size()}, {"base_size", base_tree_.size()}});
    d0_busy_ = true;
    push(Ev::kDraftReady, now_ + cost_.draft.growth_s(cfg.d_se));
  }

  void notify_step() {
    if (!observer_) return;
    SimSnapshot snap;
    snap.time = now_;
    snap.round = round_;
    snap.l_glo = l_glo_;
    snap.epoch = epoch_;
    for (const auto& e : seq_.entries) snap.tree_positions.push_back(e.position);
    auto add = [](std::vector<Position>& out, const Flight& f) {
      if (f.prefill) return;
      for (const auto& e : f.segment.entries) out.push_back(e.position);
    };
    for (const auto& f : ready_) add(snap.pending, f);
    for (const auto& f : pending_) add(snap.pending, f);
    for (const auto& [id, f] : transit_) add(snap.in_transit, f);
    for (const auto& job : d0_queue_) {
      for (const auto& f : job) add(snap.awaiting_eval, f);
    }
    for (const auto& f : naive_buffer_) add(snap.awaiting_eval, f);
    for (const auto& [pos, dist] : available_) snap.verified.push_back(pos);
    for (const auto& s : stages_) {
      SimSnapshot::StageView view;
      view.kv = s.kv;
      view.applied_epoch = s.applied_epoch;
      for (const auto& f : s.inbox) add(view.queued, f);
      if (s.computing) add(view.computing, *s.computing);
      snap.stages.push_back(std::move(view));
    }
    for (auto* v : {&snap.tree_positions, &snap.pending, &snap.in_transit, &snap.awaiting_eval, &snap.verified}) {
      std::sort(v->begin(), v->end());
    }
    snap.counters = counters_;
    snap.tree_size = static_cast<std::int64_t>(tree_.size());
    observer_->on_step(snap);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case Ev::kArriveStage:
        on_arrive_stage(ev);
        break;
      case Ev::kComputeDone:
        on_compute_done(ev);
        break;
      case Ev::kArriveD0:
        on_arrive_d0(ev);
        break;
      case Ev::kEvalDone:
        on_eval_done(ev);
        break;
      case Ev::kPruneArrive:
        on_prune_arrive(ev);
        break;
      case Ev::kDraftReady:
        on_draft_ready(ev);
        break;
    }
  }

  StrategyId strategy_;
  StrategyFlags flags_;
  const TokenModel& draft_;
  const TokenModel& base_model_;
  const CostModel& cost_;
  SimParams params_;
  SimObserver* observer_;
  SamplingMode mode_ = SamplingMode::kGreedy;
  bool prefill_only_ = false;

  std::vector<Token> prompt_;
  std::vector<Token> history_;  // prompt + committed; ends with the tree root
  std::vector<Token> committed_;
  Token first_token_ = 0;

  double now_ = 0.0;
  std::priority_queue<Event, std::vector<Event>, LaterFirst> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_flight_ = 0;

  std::vector<Stage> stages_;
  std::vector<Channel> links_;
  std::vector<Channel> control_;
  std::unordered_map<std::uint64_t, Flight> transit_;
  std::deque<Flight> pending_;
  std::vector<Flight> ready_;
  std::optional<std::uint64_t> outstanding_;
  std::deque<std::vector<Flight>> d0_queue_;
  std::vector<Flight> d0_job_;
  std::vector<Flight> naive_buffer_;
  bool d0_busy_ = false;

  int round_ = 0;
  int ordinal_ = 0;
  int round_segments_ = 0;
  int round_arrived_ = 0;
  DraftTree tree_{0};
  DraftTree base_tree_{0};
  DraftSequence seq_;
  std::unordered_map<Position, NodeId> node_at_;
  Position root_position_ = -1;
  std::unordered_map<Position, TokenDistribution> available_;
  Position l_glo_ = 0;
  Position next_position_ = 0;
  std::int64_t epoch_ = 0;
  std::unordered_map<std::int64_t, PruneMessage> messages_;
  RoundCounters counters_;

  bool done_ = false;
  bool finished_ = false;
  double prefill_s_ = 0.0;
  double end_s_ = 0.0;
  std::int64_t rounds_ = 0;
  std::int64_t steps_ = 0;
  std::vector<TraceEvent> trace_;
};

}  // namespace

PrefillResult chunked_prefill(std::span<const Token> prompt, int L_max, int N, const CostModel& cost,
                              const TokenModel& base, double temperature, std::uint64_t seed) {
  if (prompt.empty()) throw std::invalid_argument("chunked_prefill: empty prompt");
  SimParams params;
  params.N = N;
  params.L_max = L_max;
  params.temperature = temperature;
  params.seed = seed;
  params.gen_limit = 0;
  Simulator sim(StrategyId::kFlowSpec, prompt, base, base, cost, params, nullptr);
  RunResult run = sim.run(/*prefill_only=*/true);
  return PrefillResult{sim.first_token(), sim.caches(), run.prefill_s, std::move(run.trace)};
}

RunResult simulate(StrategyId strategy, std::span<const Token> prompt, const TokenModel& draft,
                   const TokenModel& base, const CostModel& cost, const SimParams& params,
                   SimObserver* observer) {
  Simulator sim(strategy, prompt, draft, base, cost, params, observer);
  return sim.run();
}

}  // namespace flowspec
