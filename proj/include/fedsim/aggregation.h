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

// Synchronous federated-averaging server running inside the simulated
// trusted environment.

#ifndef FEDSIM_AGGREGATION_H_
#define FEDSIM_AGGREGATION_H_

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/model.h"
#include "fedsim/record.h"
#include "fedsim/rng.h"

namespace fedsim {

// Where differential-privacy noise is applied. Exactly one is active.
enum class NoisePlacement { kDevice, kTee };

std::string_view PlacementName(NoisePlacement placement);
std::optional<NoisePlacement> ParsePlacement(std::string_view name);

struct AggregationConfig {
  int target_updates = 100;  // K
  int64_t max_wait = 1000;   // simulated time units per round
  NoisePlacement noise_placement = NoisePlacement::kDevice;
  double tee_noise_std = 0.0;
  double server_lr = 1.0;
  int max_rounds = 30;
  std::optional<double> stop_metric_threshold;  // on eval accuracy

  absl::Status Validate() const;
};

enum class RoundStatus { kOpen, kComplete, kAbandoned };

enum class SubmitOutcome {
  kAccepted,
  kRejectedStale,
  kRejectedCorrupt,
  kRejectedClosed,
};

std::string_view OutcomeName(SubmitOutcome outcome);

// One round's collection of updates. Submit is safe to call concurrently;
// the accept decision and the OPEN -> COMPLETE transition are made under a
// single lock so exactly K updates are ever accepted.
class RoundState {
 public:
  RoundState(int64_t round_id, int64_t snapshot_version, int target_updates,
             int64_t max_wait);

  SubmitOutcome Submit(GradientUpdate update);
  // Advances simulated time; an OPEN round past max_wait is ABANDONED.
  void Advance(int64_t time_units);
  void Abandon();

  int64_t round_id() const { return round_id_; }
  int64_t snapshot_version() const { return snapshot_version_; }
  RoundStatus status() const;
  int64_t elapsed() const;
  std::vector<GradientUpdate> accepted() const;
  int64_t rejected_count() const;

 private:
  const int64_t round_id_;
  const int64_t snapshot_version_;
  const int target_updates_;
  const int64_t max_wait_;
  mutable std::mutex mu_;
  RoundStatus status_ = RoundStatus::kOpen;
  int64_t elapsed_ = 0;
  int64_t rejected_ = 0;
  std::vector<GradientUpdate> updates_;
};

struct RoundSummary {
  int64_t round_id = 0;
  int64_t version = 0;  // model version after the round
  RoundStatus status = RoundStatus::kComplete;
  int64_t participants = 0;
  int64_t samples = 0;
  int64_t rejected = 0;
  double delta_norm = 0;  // L2 norm of the applied (noised) average
  std::optional<double> eval_accuracy;

  LineRecord ToRecord() const;
};

struct GlobalModel {
  ModelWeights weights;
  std::vector<RoundSummary> history;

  int64_t version() const { return weights.version; }
  int64_t completed_rounds() const;
};

// Sum of w_i * delta_i over sum of w_i, with updates summed in a canonical
// order (by sample weight, then delta lexicographically) so the result is
// bitwise independent of arrival order.
absl::StatusOr<std::vector<double>> WeightedAverage(
    std::span<const GradientUpdate> updates);

// Coordinator; owns the global model and at most one open round.
class AggregationServer {
 public:
  AggregationServer(ModelWeights initial, AggregationConfig config);

  // FailedPrecondition while a round is open.
  absl::StatusOr<std::shared_ptr<RoundState>> OpenRound();
  // Requires the current round to be COMPLETE. Adds TEE noise when that
  // placement is configured, applies server_lr, and bumps the version.
  absl::Status Aggregate(Rng& rng);
  // Discards the current round (whatever its state) and records it.
  absl::Status AbandonRound();

  const GlobalModel& model() const { return model_; }
  const AggregationConfig& config() const { return config_; }
  std::shared_ptr<RoundState> current_round() const { return current_; }
  void RecordEvalAccuracy(double accuracy);

 private:
  GlobalModel model_;
  AggregationConfig config_;
  std::shared_ptr<RoundState> current_;
  int64_t next_round_id_ = 0;
};

enum class StopReason { kContinue, kMaxRounds, kMetric };

std::string_view StopReasonName(StopReason reason);

// Stops once max_rounds rounds have completed, or when the latest completed
// round's eval accuracy reaches the configured threshold.
StopReason ShouldStop(std::span<const RoundSummary> history,
                      const AggregationConfig& config);

}  // namespace fedsim

#endif  // FEDSIM_AGGREGATION_H_
