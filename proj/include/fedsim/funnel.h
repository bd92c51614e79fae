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

// De-identified funnel logging.
//
// A session is one device's attempt at one use case (training or inference).
// Sessions are scoped by an ephemeral 128-bit id that is never linked to the
// device. Events carry only the session id, a registered use-case tag, small
// (phase, step) ordinals, a status with an enumerated reason code, and a
// coarse time bucket. Every field is bounded so none of them can carry a
// device identifier.
//
// Event line format, fields in this order:
//
//   funnel_event session=<32 hex> use_case=<tag> phase=<n> step=<n>
//                status=<success|failure> reason=<code> bucket=<n>

#ifndef FEDSIM_FUNNEL_H_
#define FEDSIM_FUNNEL_H_

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/record.h"
#include "fedsim/rng.h"

namespace fedsim {

struct SessionId {
  uint64_t hi = 0;
  uint64_t lo = 0;

  std::string ToString() const;  // 32 lowercase hex digits
  static std::optional<SessionId> Parse(std::string_view text);

  friend auto operator<=>(const SessionId&, const SessionId&) = default;
};

SessionId NewSessionId(Rng& rng);

enum class StepStatus { kSuccess, kFailure };

enum class FailureReason {
  kNone,
  kBattery,
  kNetwork,
  kNotIdle,
  kStorage,
  kAppVersion,
  kWarmup,
  kNoData,
  kTransform,
  kDroppedByPolicy,
  kTraining,
  kBatteryDrop,
  kNetworkLoss,
  kRejected,
  kModelMissing,
  kModelStale,
};

std::string_view ReasonName(FailureReason reason);
std::optional<FailureReason> ParseReason(std::string_view name);

struct FunnelEvent {
  SessionId session;
  std::string use_case;
  int phase = 1;  // 1-based
  int step = 1;   // 1-based within the phase
  StepStatus status = StepStatus::kSuccess;
  FailureReason reason = FailureReason::kNone;
  int64_t time_bucket = 0;

  LineRecord ToRecord() const;
  static absl::StatusOr<FunnelEvent> FromRecord(const LineRecord& record);
};

// Phases in order, each with a name and an ordered list of step names.
struct PipelineShape {
  struct Phase {
    std::string name;
    std::vector<std::string> steps;
  };
  std::vector<Phase> phases;

  // eligibility, data_ready, transformed, submission_decision, trained,
  // uploaded; one step each.
  static PipelineShape Training();
  // model_ready, transformed, scored; one step each.
  static PipelineShape Inference();

  bool Contains(int phase, int step) const;
};

// One bucket per simulated hour; about a year of buckets.
inline constexpr int64_t kMaxTimeBucket = 24 * 366;

// Thread-safe event sink. Use cases must be registered up front and session
// ids must come from the sink, so an event cannot smuggle an identifier
// through either field.
class FunnelSink {
 public:
  FunnelSink() = default;

  // Tags are short lowercase words; anything that looks like an identifier
  // (long digit or hex runs) is refused.
  absl::Status RegisterUseCase(std::string_view use_case,
                               PipelineShape shape);
  SessionId NewSession(Rng& rng);

  absl::Status Log(const FunnelEvent& event);

  // Deduplicated snapshot in canonical order.
  std::vector<FunnelEvent> Snapshot() const;
  size_t raw_size() const;
  std::optional<PipelineShape> Shape(std::string_view use_case) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, PipelineShape, std::less<>> shapes_;
  std::set<SessionId> sessions_;
  std::vector<FunnelEvent> events_;
};

// True when `tag` could plausibly encode an identifier.
bool LooksLikeIdentifier(std::string_view tag);

// One event per (session, use_case, phase, step). When duplicates disagree
// the smallest by (status, reason, bucket) wins, so the result does not
// depend on arrival order. Output is sorted by that key as well.
std::vector<FunnelEvent> DedupEvents(std::span<const FunnelEvent> events);

struct ConservationViolation {
  std::string use_case;
  int phase = 0;
  int64_t observed = 0;  // successes(p) + failures(p)
  int64_t expected = 0;  // successes(p - 1)
};

// Successes of a phase are counted at its final step; failures at any step.
// Checks successes(p) + failures(p) == successes(p - 1) for p > 1.
std::vector<ConservationViolation> ValidateFunnel(
    std::span<const FunnelEvent> events, const PipelineShape& shape,
    std::string_view use_case);

struct StepReport {
  int phase = 0;
  int step = 0;
  std::string name;
  int64_t entrants = 0;
  int64_t successes = 0;
  int64_t failures = 0;
  double survival = 0;  // successes / entrants, 0 when nobody entered
  std::vector<std::pair<FailureReason, int64_t>> top_reasons;
};

struct PhaseCounts {
  int64_t successes = 0;
  int64_t failures = 0;
};

struct FunnelReport {
  std::string use_case;
  std::vector<PhaseCounts> phases;
  std::vector<StepReport> steps;
  std::vector<ConservationViolation> violations;

  std::vector<LineRecord> ToRecords() const;
  std::string ToTable() const;
};

// Entrants of the first step are everyone who logged it; later steps are
// entered by the successes of the step before.
FunnelReport DropoffReport(std::span<const FunnelEvent> events,
                           const PipelineShape& shape,
                           std::string_view use_case, int top_k = 3);

// Shape implied by the events of one use case: as many phases as the largest
// phase seen, each with as many steps as its largest step seen.
PipelineShape InferShape(std::span<const FunnelEvent> events,
                         std::string_view use_case);

// Parses a file of funnel_event lines.
absl::StatusOr<std::vector<FunnelEvent>> ParseFunnelEvents(
    std::string_view text);

}  // namespace fedsim

#endif  // FEDSIM_FUNNEL_H_
