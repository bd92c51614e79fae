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

// Experiment configuration, loaded from and saved to JSON.
//
// Every knob of a run lives here, so a config file plus its seed reproduces
// a run exactly. Unknown keys are rejected to catch typos.

#ifndef FEDSIM_CONFIG_H_
#define FEDSIM_CONFIG_H_

#include <cstdint>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/aggregation.h"
#include "fedsim/model.h"
#include "fedsim/orchestrator.h"
#include "fedsim/population.h"

namespace fedsim {

struct AnalyticsConfig {
  int64_t devices = 20000;  // size of the separate analytics fleet
  double flip_prob = 0.1;
  double balance_target = 0.5;
  int quantile_iterations = 12;
  int64_t quantile_cohort = 2000;
};

struct FaultConfig {
  double battery_drop_rate = 0.0;
  double network_loss_rate = 0.0;
};

// Aggregation defaults for the 2000-device desk fleet: every device can
// check in once before a round is abandoned.
inline AggregationConfig DeskAggregation() {
  AggregationConfig a;
  a.max_wait = 2000;
  return a;
}

struct ExperimentConfig {
  uint64_t seed = 1;
  PopulationConfig population;
  int64_t eval_devices = 2000;
  ModelConfig model{0, {8}};  // input_dim 0 means "number of features"
  TrainHyper train{.learning_rate = 1.0};  // desk-scale rounds need a large step
  AggregationConfig aggregation = DeskAggregation();
  AnalyticsConfig analytics;
  EligibilityCriteria eligibility;
  FaultConfig faults;
  bool balancing = true;
  bool normalization = true;
  double metric_noise_std = 0.0;
  int threshold_points = 101;
  int warmup_ticks = 0;
  int max_consecutive_abandoned = 3;
  std::string output_dir;

  absl::Status Validate() const;
  std::string ToJson() const;
  static absl::StatusOr<ExperimentConfig> FromJson(std::string_view text);
};

}  // namespace fedsim

#endif  // FEDSIM_CONFIG_H_
