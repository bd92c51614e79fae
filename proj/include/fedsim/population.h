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

// Synthetic fleet generator.
//
// Each example has latent z ~ N(0, I). Feature j is x_j = scale_j * z_j with
// scales log-spaced from 1 to `scale_disparity`, and the label is drawn from
// a logistic model over the raw features:
//
//   P(y = 1 | x) = sigmoid(sum_j (w_j / scale_j) x_j + bias)
//
// so rescaling features changes how hard the problem is to optimize but not
// its Bayes decision boundary. Examples are accepted by rejection until the
// class counts hit round(positive_rate * N) exactly.
//
// Feature origins cycle SERVER, DEVICE, BOTH by index. A BOTH feature has a
// server copy observed with noise server_signal_noise * scale and a device
// copy observed with the smaller device_signal_noise * scale.

#ifndef FEDSIM_POPULATION_H_
#define FEDSIM_POPULATION_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/device_state.h"
#include "fedsim/joiner.h"
#include "fedsim/schema.h"

namespace fedsim {

struct PopulationConfig {
  int64_t device_count = 2000;
  int samples_per_device = 1;
  double positive_rate = 0.5;
  double scale_disparity = 1.0;
  double device_signal_noise = 0.05;
  double server_signal_noise = 0.5;
  std::vector<double> true_weights = {2.0, -2.5, 1.5, -2.0, 2.5, -1.5};
  double true_bias = 0.0;
  uint64_t seed = 1;

  absl::Status Validate() const;
};

struct Population {
  PopulationConfig config;
  FeatureSchema schema;
  std::vector<DeviceState> devices;
  std::vector<ServerFeatureRecord> server_records;
  std::vector<LabelRecord> label_records;
};

FeatureSchema MakeSchema(const PopulationConfig& config);

// Deterministic in config (including seed). Fails with ResourceExhausted when
// the requested positive rate cannot be reached within the rejection budget.
absl::StatusOr<Population> GeneratePopulation(const PopulationConfig& config);

// Structured-text fixture. Re-parsing yields a fleet identical to the one
// serialized (same stores, records and resources).
std::string SerializePopulation(const Population& population);
absl::StatusOr<Population> ParsePopulation(std::string_view text);

}  // namespace fedsim

#endif  // FEDSIM_POPULATION_H_
