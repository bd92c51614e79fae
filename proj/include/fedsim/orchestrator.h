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

// On-device orchestrator: eligibility, sample submission control, the
// training session pipeline and the inference path.

#ifndef FEDSIM_ORCHESTRATOR_H_
#define FEDSIM_ORCHESTRATOR_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/analytics.h"
#include "fedsim/device_state.h"
#include "fedsim/funnel.h"
#include "fedsim/model.h"
#include "fedsim/record.h"
#include "fedsim/rng.h"
#include "fedsim/transform.h"

namespace fedsim {

struct EligibilityCriteria {
  double min_battery = 0.2;
  // Minimum acceptable class; offline devices are never eligible.
  NetworkClass required_network = NetworkClass::kUnmetered;
  bool require_idle = true;
  int64_t min_storage_bytes = 100'000'000;
  int min_app_version = 1;

  absl::Status Validate() const;
};

struct EligibilityResult {
  bool eligible = true;
  FailureReason reason = FailureReason::kNone;  // first failing criterion
};

// Checks battery, network, idle, storage and app version in that order.
EligibilityResult CheckEligibility(const DeviceState& device,
                                   const EligibilityCriteria& criteria);

// Bernoulli draw with the keep-probability of the sample's class.
bool DecideSubmission(int label, const KeepPolicy& policy, Rng& rng);

// What server-side metadata serving hands a device before a session.
struct MetadataRecord {
  EligibilityCriteria criteria;
  int64_t model_version = 0;
  int64_t spec_version = 0;
  KeepPolicy policy;
  std::string purpose = "training";

  LineRecord ToRecord() const;
  static absl::StatusOr<MetadataRecord> FromRecord(const LineRecord& record);
};

// Faults injected into one session.
struct SessionFaults {
  bool battery_drop = false;  // during training
  bool network_loss = false;  // at upload
};

struct SessionContext {
  const ModelWeights* snapshot = nullptr;
  const CompiledTransform* transform = nullptr;
  TrainHyper hyper;
  bool noise_on_device = false;
  KeepPolicy policy;
  EligibilityCriteria criteria;
  int warmup_ticks = 0;
  std::string use_case = "training";
  int64_t time_bucket = 0;
  FunnelSink* sink = nullptr;  // optional
};

// Training pipeline phases, 1-based as logged.
enum SessionPhase : int {
  kPhaseEligibility = 1,
  kPhaseDataReady = 2,
  kPhaseTransformed = 3,
  kPhaseSubmission = 4,
  kPhaseTrained = 5,
  kPhaseUploaded = 6,
};

struct SessionOutcome {
  std::optional<GradientUpdate> update;
  int failed_phase = 0;  // 0 on success
  FailureReason reason = FailureReason::kNone;
  int64_t submitted_positive = 0;
  int64_t submitted_negative = 0;
  // Transformed inputs of every local example, for equivalence checks.
  std::vector<std::vector<double>> transformed;
};

// Runs eligibility -> data_ready -> transformed -> submission_decision ->
// trained -> uploaded, logging one funnel event per step. The first failing
// step ends the session.
SessionOutcome RunTrainingSession(const DeviceState& device,
                                  const SessionContext& context,
                                  const SessionFaults& faults, Rng& rng);

// Seals a model binary into the device's local store.
absl::Status InstallModel(DeviceState& device, const ModelWeights& weights);

using ModelFetcher = std::function<absl::StatusOr<ModelWeights>()>;

// Scores one example with the locally stored model through the same
// transform as training. A stored model older than `required_version` is
// refused and replaced through `fetch` (when given) before scoring.
// NotFound: no model; DataLoss: unreadable model; FailedPrecondition: stale
// model and no way to refresh it.
absl::StatusOr<double> RunInference(DeviceState& device,
                                    const CompiledTransform& transform,
                                    const NamedValues& server_features,
                                    const NamedValues& device_signals,
                                    int64_t required_version,
                                    const ModelFetcher& fetch = nullptr);

}  // namespace fedsim

#endif  // FEDSIM_ORCHESTRATOR_H_
