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

// Centrally trained reference model. Sees the whole fleet at once, which no
// production component may do; it exists only as a comparison ceiling.

#ifndef FEDSIM_BASELINE_H_
#define FEDSIM_BASELINE_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/device_state.h"
#include "fedsim/model.h"
#include "fedsim/population.h"
#include "fedsim/schema.h"

namespace fedsim {

// Schema-ordered feature vector preferring the device copy of each feature
// over the server copy.
std::vector<double> AugmentedFeatures(const FeatureSchema& schema,
                                      const LocalExample& example);

// Every example held by the fleet, in device order.
absl::StatusOr<std::vector<Sample>> CollectSamples(
    const Population& population);

struct BaselineOptions {
  ModelConfig model;  // input_dim is taken from the schema when 0
  TrainHyper hyper;   // batch_size and learning_rate are used; steps derive
                      // from epochs
  int epochs = 20;
  bool normalize = true;
  bool balance = true;
  uint64_t seed = 1;
};

struct BaselineMetrics {
  double auc = 0;
  double accuracy = 0;
  double loss = 0;
  int64_t train_samples = 0;
  int64_t eval_samples = 0;
};

// Trains on `train` with exact global z-scoring and exact undersampling of
// the majority class, then evaluates on `eval`.
absl::StatusOr<BaselineMetrics> CentralBaseline(const Population& train,
                                                const Population& eval,
                                                const BaselineOptions& options);

}  // namespace fedsim

#endif  // FEDSIM_BASELINE_H_
