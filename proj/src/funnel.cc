// Copyright 2026 The Fedsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedsim/funnel.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <tuple>

#include <fmt/core.h>

namespace fedsim {
namespace {

constexpr std::array<std::string_view, 16> kReasonNames = {
    "none",        "battery",          "network",     "not_idle",
    "storage",     "app_version",      "warmup",      "no_data",
    "transform",   "dropped_by_policy", "training",   "battery_drop",
    "network_loss", "rejected",        "model_missing", "model_stale"};

constexpr size_t kMaxUseCaseLength = 32;

auto DedupKey(const FunnelEvent& e) {
  return std::tie(e.session, e.use_case, e.phase, e.step);
}

auto OrderKey(const FunnelEvent& e) {
  return std::tie(e.session, e.use_case, e.phase, e.step, e.status, e.reason,
                  e.time_bucket);
}

bool IsHex(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }

}  // namespace

std::string SessionId::ToString() const {
  return fmt::format("{:016x}{:016x}", hi, lo);
}

std::optional<SessionId> SessionId::Parse(std::string_view text) {
  if (text.size() != 32) return std::nullopt;
  for (char c : text) {
    if (!IsHex(c)) return std::nullopt;
  }
  SessionId id;
  std::from_chars(text.data(), text.data() + 16, id.hi, 16);
  std::from_chars(text.data() + 16, text.data() + 32, id.lo, 16);
  return id;
}

SessionId NewSessionId(Rng& rng) {
  SessionId id;
  id.hi = rng.NextU64();
  id.lo = rng.NextU64();
  return id;
}

std::string_view ReasonName(FailureReason reason) {
  return kReasonNames[static_cast<size_t>(reason)];
}

std::optional<FailureReason> ParseReason(std::string_view name) {
  for (size_t i = 0; i < kReasonNames.size(); ++i) {
    if (kReasonNames[i] == name) return static_cast<FailureReason>(i);
  }
  return std::nullopt;
}

LineRecord FunnelEvent::ToRecord() const {
  LineRecord r("funnel_event");
  r.Add("session", session.ToString())
      .Add("use_case", use_case)
      .Add("phase", phase)
      .Add("step", step)
      .Add("status", status == StepStatus::kSuccess ? "success" : "failure")
      .Add("reason", ReasonName(reason))
      .Add("bucket", time_bucket);
  return r;
}

absl::StatusOr<FunnelEvent> FunnelEvent::FromRecord(const LineRecord& record) {
  if (record.tag() != "funnel_event") {
    return absl::InvalidArgumentError("not a funnel_event record");
  }
  static constexpr std::string_view kFields[] = {
      "session", "use_case", "phase", "step", "status", "reason", "bucket"};
  if (record.fields().size() != std::size(kFields)) {
    return absl::InvalidArgumentError("funnel_event has unexpected fields");
  }
  for (size_t i = 0; i < std::size(kFields); ++i) {
    if (record.fields()[i].first != kFields[i]) {
      return absl::InvalidArgumentError(
          fmt::format("funnel_event field {} should be '{}'", i, kFields[i]));
    }
  }
  FunnelEvent e;
  std::optional<SessionId> session = SessionId::Parse(*record.Get("session"));
  absl::StatusOr<int64_t> phase = record.GetInt("phase");
  absl::StatusOr<int64_t> step = record.GetInt("step");
  absl::StatusOr<int64_t> bucket = record.GetInt("bucket");
  const std::string status = *record.Get("status");
  std::optional<FailureReason> reason = ParseReason(*record.Get("reason"));
  if (!session || !phase.ok() || !step.ok() || !bucket.ok() || !reason ||
      (status != "success" && status != "failure")) {
    return absl::InvalidArgumentError("malformed funnel_event");
  }
  e.session = *session;
  e.use_case = *record.Get("use_case");
  e.phase = static_cast<int>(*phase);
  e.step = static_cast<int>(*step);
  e.status = status == "success" ? StepStatus::kSuccess : StepStatus::kFailure;
  e.reason = *reason;
  e.time_bucket = *bucket;
  if (e.phase < 1 || e.step < 1 || e.phase != *phase || e.step != *step) {
    return absl::InvalidArgumentError("funnel_event ordinals out of range");
  }
  return e;
}

PipelineShape PipelineShape::Training() {
  PipelineShape s;
  for (const char* name : {"eligibility", "data_ready", "transformed",
                           "submission_decision", "trained", "uploaded"}) {
    s.phases.push_back({name, {name}});
  }
  return s;
}

PipelineShape PipelineShape::Inference() {
  PipelineShape s;
  for (const char* name :
       {"model_ready", "transformed", "scored"}) {
    s.phases.push_back({name, {name}});
  }
  return s;
}

bool PipelineShape::Contains(int phase, int step) const {
  return phase >= 1 && phase <= static_cast<int>(phases.size()) && step >= 1 &&
         step <= static_cast<int>(phases[phase - 1].steps.size());
}

bool LooksLikeIdentifier(std::string_view tag) {
  size_t digits = 0, hex = 0;
  bool hex_has_digit = false;
  for (char c : tag) {
    digits = (c >= '0' && c <= '9') ? digits + 1 : 0;
    if (IsHex(c)) {
      ++hex;
      hex_has_digit = hex_has_digit || (c >= '0' && c <= '9');
    } else {
      hex = 0;
      hex_has_digit = false;
    }
    if (digits >= 6 || (hex >= 8 && hex_has_digit)) return true;
  }
  return false;
}

absl::Status FunnelSink::RegisterUseCase(std::string_view use_case,
                                         PipelineShape shape) {
  if (use_case.empty() || use_case.size() > kMaxUseCaseLength ||
      !IsValidToken(use_case) || !(use_case[0] >= 'a' && use_case[0] <= 'z')) {
    return absl::InvalidArgumentError(
        "use case must be a short lowercase word");
  }
  if (LooksLikeIdentifier(use_case)) {
    return absl::InvalidArgumentError(
        fmt::format("use case '{}' looks like an identifier", use_case));
  }
  if (shape.phases.empty()) {
    return absl::InvalidArgumentError("pipeline shape has no phases");
  }
  for (const PipelineShape::Phase& p : shape.phases) {
    if (p.steps.empty()) {
      return absl::InvalidArgumentError("pipeline phase has no steps");
    }
  }
  std::lock_guard lock(mu_);
  shapes_[std::string(use_case)] = std::move(shape);
  return absl::OkStatus();
}

SessionId FunnelSink::NewSession(Rng& rng) {
  SessionId id = NewSessionId(rng);
  std::lock_guard lock(mu_);
  sessions_.insert(id);
  return id;
}

absl::Status FunnelSink::Log(const FunnelEvent& event) {
  if (event.time_bucket < 0 || event.time_bucket > kMaxTimeBucket) {
    return absl::InvalidArgumentError("time bucket out of range");
  }
  if (static_cast<size_t>(event.reason) >= kReasonNames.size()) {
    return absl::InvalidArgumentError("unknown reason code");
  }
  if ((event.status == StepStatus::kSuccess) !=
      (event.reason == FailureReason::kNone)) {
    return absl::InvalidArgumentError(
        "reason code must be set exactly for failures");
  }
  std::lock_guard lock(mu_);
  auto shape = shapes_.find(event.use_case);
  if (shape == shapes_.end()) {
    return absl::InvalidArgumentError("unregistered use case");
  }
  if (!shape->second.Contains(event.phase, event.step)) {
    return absl::InvalidArgumentError("phase/step outside the pipeline shape");
  }
  if (!sessions_.contains(event.session)) {
    return absl::InvalidArgumentError("session id was not issued by this sink");
  }
  events_.push_back(event);
  return absl::OkStatus();
}

std::vector<FunnelEvent> FunnelSink::Snapshot() const {
  std::lock_guard lock(mu_);
  return DedupEvents(events_);
}

size_t FunnelSink::raw_size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::optional<PipelineShape> FunnelSink::Shape(
    std::string_view use_case) const {
  std::lock_guard lock(mu_);
  auto it = shapes_.find(use_case);
  if (it == shapes_.end()) return std::nullopt;
  return it->second;
}

std::vector<FunnelEvent> DedupEvents(std::span<const FunnelEvent> events) {
  std::vector<FunnelEvent> sorted(events.begin(), events.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const FunnelEvent& a, const FunnelEvent& b) {
              return OrderKey(a) < OrderKey(b);
            });
  std::vector<FunnelEvent> out;
  for (FunnelEvent& e : sorted) {
    if (!out.empty() && DedupKey(out.back()) == DedupKey(e)) continue;
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

struct StepTally {
  int64_t successes = 0;
  int64_t failures = 0;
  std::map<FailureReason, int64_t> reasons;
};

// tallies[phase - 1][step - 1], over deduplicated events of one use case.
std::vector<std::vector<StepTally>> Tally(std::span<const FunnelEvent> events,
                                          const PipelineShape& shape,
                                          std::string_view use_case) {
  std::vector<std::vector<StepTally>> tallies;
  for (const PipelineShape::Phase& p : shape.phases) {
    tallies.emplace_back(p.steps.size());
  }
  for (const FunnelEvent& e : DedupEvents(events)) {
    if (e.use_case != use_case || !shape.Contains(e.phase, e.step)) continue;
    StepTally& t = tallies[e.phase - 1][e.step - 1];
    if (e.status == StepStatus::kSuccess) {
      ++t.successes;
    } else {
      ++t.failures;
      ++t.reasons[e.reason];
    }
  }
  return tallies;
}

std::vector<PhaseCounts> PhaseTotals(
    const std::vector<std::vector<StepTally>>& tallies) {
  std::vector<PhaseCounts> out;
  for (const std::vector<StepTally>& steps : tallies) {
    PhaseCounts c;
    c.successes = steps.back().successes;
    for (const StepTally& t : steps) c.failures += t.failures;
    out.push_back(c);
  }
  return out;
}

std::vector<ConservationViolation> Violations(
    const std::vector<PhaseCounts>& phases, std::string_view use_case) {
  std::vector<ConservationViolation> out;
  for (size_t p = 1; p < phases.size(); ++p) {
    const int64_t observed = phases[p].successes + phases[p].failures;
    const int64_t expected = phases[p - 1].successes;
    if (observed != expected) {
      out.push_back({std::string(use_case), static_cast<int>(p + 1), observed,
                     expected});
    }
  }
  return out;
}

}  // namespace

std::vector<ConservationViolation> ValidateFunnel(
    std::span<const FunnelEvent> events, const PipelineShape& shape,
    std::string_view use_case) {
  return Violations(PhaseTotals(Tally(events, shape, use_case)), use_case);
}

FunnelReport DropoffReport(std::span<const FunnelEvent> events,
                           const PipelineShape& shape,
                           std::string_view use_case, int top_k) {
  const std::vector<std::vector<StepTally>> tallies =
      Tally(events, shape, use_case);
  FunnelReport report;
  report.use_case = std::string(use_case);
  report.phases = PhaseTotals(tallies);
  report.violations = Violations(report.phases, use_case);
  int64_t previous_successes = -1;
  for (size_t p = 0; p < tallies.size(); ++p) {
    for (size_t s = 0; s < tallies[p].size(); ++s) {
      const StepTally& t = tallies[p][s];
      StepReport step;
      step.phase = static_cast<int>(p + 1);
      step.step = static_cast<int>(s + 1);
      step.name = shape.phases[p].steps[s];
      step.successes = t.successes;
      step.failures = t.failures;
      step.entrants = previous_successes < 0 ? t.successes + t.failures
                                             : previous_successes;
      step.survival = step.entrants > 0
                          ? static_cast<double>(t.successes) / step.entrants
                          : 0.0;
      std::vector<std::pair<FailureReason, int64_t>> reasons(t.reasons.begin(),
                                                             t.reasons.end());
      std::stable_sort(reasons.begin(), reasons.end(),
                       [](const auto& a, const auto& b) {
                         return a.second > b.second;
                       });
      if (reasons.size() > static_cast<size_t>(top_k)) reasons.resize(top_k);
      step.top_reasons = std::move(reasons);
      previous_successes = t.successes;
      report.steps.push_back(std::move(step));
    }
  }
  return report;
}

std::vector<LineRecord> FunnelReport::ToRecords() const {
  std::vector<LineRecord> out;
  for (size_t p = 0; p < phases.size(); ++p) {
    LineRecord r("funnel_phase");
    r.Add("use_case", use_case)
        .Add("phase", static_cast<int64_t>(p + 1))
        .Add("successes", phases[p].successes)
        .Add("failures", phases[p].failures);
    out.push_back(std::move(r));
  }
  for (const StepReport& s : steps) {
    LineRecord r("funnel_step");
    r.Add("use_case", use_case)
        .Add("phase", s.phase)
        .Add("step", s.step)
        .Add("name", s.name)
        .Add("entrants", s.entrants)
        .Add("successes", s.successes)
        .Add("failures", s.failures)
        .Add("survival", s.survival);
    for (size_t i = 0; i < s.top_reasons.size(); ++i) {
      r.Add(fmt::format("reason_{}", i + 1), ReasonName(s.top_reasons[i].first))
          .Add(fmt::format("count_{}", i + 1), s.top_reasons[i].second);
    }
    out.push_back(std::move(r));
  }
  for (const ConservationViolation& v : violations) {
    LineRecord r("funnel_violation");
    r.Add("use_case", v.use_case)
        .Add("phase", v.phase)
        .Add("observed", v.observed)
        .Add("expected", v.expected);
    out.push_back(std::move(r));
  }
  return out;
}

std::string FunnelReport::ToTable() const {
  std::string out = fmt::format("funnel: {}\n", use_case);
  out += fmt::format("{:<5} {:<22} {:>9} {:>9} {:>9} {:>8}  {}\n", "phase",
                     "step", "entrants", "success", "failure", "survival",
                     "top reasons");
  for (const StepReport& s : steps) {
    std::string reasons;
    for (const auto& [reason, count] : s.top_reasons) {
      if (!reasons.empty()) reasons += ", ";
      reasons += fmt::format("{} ({})", ReasonName(reason), count);
    }
    out += fmt::format("{:<5} {:<22} {:>9} {:>9} {:>9} {:>8.4f}  {}\n",
                       fmt::format("{}.{}", s.phase, s.step), s.name,
                       s.entrants, s.successes, s.failures, s.survival,
                       reasons);
  }
  if (violations.empty()) {
    out += "conservation: ok\n";
  } else {
    for (const ConservationViolation& v : violations) {
      out += fmt::format("conservation violated at phase {}: {} != {}\n",
                         v.phase, v.observed, v.expected);
    }
  }
  return out;
}

PipelineShape InferShape(std::span<const FunnelEvent> events,
                         std::string_view use_case) {
  PipelineShape shape;
  for (const FunnelEvent& e : events) {
    if (e.use_case != use_case) continue;
    if (e.phase > static_cast<int>(shape.phases.size())) {
      shape.phases.resize(e.phase);
    }
    std::vector<std::string>& steps = shape.phases[e.phase - 1].steps;
    if (e.step > static_cast<int>(steps.size())) steps.resize(e.step);
  }
  for (size_t p = 0; p < shape.phases.size(); ++p) {
    PipelineShape::Phase& phase = shape.phases[p];
    phase.name = fmt::format("phase_{}", p + 1);
    if (phase.steps.empty()) phase.steps.resize(1);
    for (size_t s = 0; s < phase.steps.size(); ++s) {
      phase.steps[s] = fmt::format("step_{}_{}", p + 1, s + 1);
    }
  }
  return shape;
}

absl::StatusOr<std::vector<FunnelEvent>> ParseFunnelEvents(
    std::string_view text) {
  std::vector<FunnelEvent> out;
  for (std::string_view line : RecordLines(text)) {
    absl::StatusOr<LineRecord> r = LineRecord::Parse(line);
    if (!r.ok()) return r.status();
    absl::StatusOr<FunnelEvent> e = FunnelEvent::FromRecord(*r);
    if (!e.ok()) return e.status();
    out.push_back(std::move(*e));
  }
  return out;
}

}  // namespace fedsim
