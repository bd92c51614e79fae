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

// End-to-end simulation of the federated lifecycle and the experiment
// drivers built on it.
//
// A run uses three disjoint fleets generated from the same population
// config: a training fleet, an analytics fleet that answers the feature and
// label statistics queries, and a held-out evaluation fleet.
//
// Reports are line records. Records whose tag starts with "exact_" or
// "oracle_" are computed from data no production component could see; they
// exist for tests and are omitted in production mode.

#ifndef FEDSIM_SIMULATION_H_
#define FEDSIM_SIMULATION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/aggregation.h"
#include "fedsim/analytics.h"
#include "fedsim/baseline.h"
#include "fedsim/config.h"
#include "fedsim/funnel.h"
#include "fedsim/metrics.h"
#include "fedsim/orchestrator.h"
#include "fedsim/population.h"
#include "fedsim/transform.h"

namespace fedsim {

inline constexpr std::string_view kTrainingUseCase = "training";

struct Fleets {
  Population train;
  Population analytics;
  Population eval;
};

absl::StatusOr<Fleets> MakeFleets(const ExperimentConfig& config);

struct FeatureQuantile {
  std::string feature;
  double q = 0.5;
  double estimate = 0;
  double oracle = 0;  // exact quantile of the analytics fleet
};

struct AnalyticsSummary {
  FeatureStats features;
  // Unset when the label query saw a single class; no keep policy exists.
  std::optional<LabelStats> labels;
  std::vector<FeatureQuantile> medians;
  // Exact moments of the analytics fleet, for comparison only.
  std::vector<std::pair<double, double>> oracle_moments;  // (mean, stddev)
  double oracle_positive_ratio = 0;

  std::vector<LineRecord> ToRecords(bool production_mode) const;
};

// Feature and label statistics from the analytics fleet. The values fed to
// the feature queries are the un-normalized transformed features each device
// would train on.
absl::StatusOr<AnalyticsSummary> RunAnalytics(const ExperimentConfig& config,
                                              const Fleets& fleets);

struct EvalPoint {
  int64_t version = 0;  // model version evaluated (0 = initial model)
  NoisedMetrics noised;
  double exact_auc = 0;
  double exact_loss = 0;
  double exact_accuracy = 0;
};

struct RunReport {
  std::string status = "completed";  // or "aborted"
  std::string stop_reason;
  AnalyticsSummary analytics;
  MetadataRecord metadata;
  TransformSpec spec;
  std::vector<RoundSummary> rounds;
  // Keep policy in force for each round attempt. The class ratio behind it
  // is re-estimated from fresh randomized reports before every attempt.
  std::vector<KeepPolicy> round_policies;
  std::vector<EvalPoint> evals;
  FunnelReport funnel;
  std::vector<FunnelEvent> funnel_events;
  ModelWeights final_model;
  int64_t sessions = 0;
  int64_t submitted_positive = 0;
  int64_t submitted_negative = 0;

  std::string Serialize(bool production_mode) const;
  std::string FunnelEventsText() const;
};

// Analytics, keep-policy publication, training rounds with per-round
// evaluation, then funnel validation. Deterministic in the config.
absl::StatusOr<RunReport> RunSimulation(const ExperimentConfig& config);

BaselineOptions BaselineOptionsFor(const ExperimentConfig& config);

struct BalancingComparison {
  KeepPolicy policy;
  ScoreHistogram off{}, on{};
  double entropy_off = 0, entropy_on = 0;
  double central_off = 0, central_on = 0;

  bool Passed() const;
  std::string ToText() const;
};

// Runs the config with balancing off and on (normalization as configured).
absl::StatusOr<BalancingComparison> ExperimentBalancing(
    const ExperimentConfig& config);

struct NormalizationComparison {
  std::vector<double> loss_off, loss_on;          // per evaluated version
  std::vector<double> accuracy_off, accuracy_on;
  double loss_ratio = 0;     // final on / final off
  double accuracy_gain = 0;  // final on - final off
  double early_improvement_off = 0;  // first third of the off curve
  double late_improvement_off = 0;   // last third of the off curve

  bool Saturated() const;
  bool Passed() const;
  std::string ToText() const;
};

absl::StatusOr<NormalizationComparison> ExperimentNormalization(
    const ExperimentConfig& config);

struct DegradationComparison {
  double federated_auc = 0;
  double baseline_auc = 0;
  bool Passed(double tolerance = 0.05) const;
  std::string ToText() const;
};

// Federated run against the central baseline on the same fleets.
absl::StatusOr<DegradationComparison> CompareWithBaseline(
    const ExperimentConfig& config);

struct SubmissionBalance {
  KeepPolicy policy;
  int64_t sessions = 0;
  int64_t positives = 0;
  int64_t negatives = 0;
  double PositiveShare() const;
};

// Runs one training session per training-fleet device (eligibility
// disabled) under the analytics-derived keep policy and counts submitted
// samples by class.
absl::StatusOr<SubmissionBalance> MeasureSubmissionBalance(
    const ExperimentConfig& config);

}  // namespace fedsim

#endif  // FEDSIM_SIMULATION_H_
