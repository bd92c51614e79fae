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

// Dense binary classifier used for on-device training and inference.
//
// The model is a multilayer perceptron with tanh hidden layers and a single
// sigmoid output unit. An empty hidden_widths list gives logistic regression.
// All parameters live in one flat vector so that updates, deltas and noise
// are plain vector arithmetic:
//
//   for each layer l (hidden layers first, output layer last):
//     W_l  (out_l x in_l, row-major)
//     b_l  (out_l)

#ifndef FEDSIM_MODEL_H_
#define FEDSIM_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/rng.h"

namespace fedsim {

struct ModelConfig {
  int input_dim = 0;
  std::vector<int> hidden_widths;

  absl::Status Validate() const;
  size_t ParameterCount() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Location of one layer inside the flat parameter vector.
struct LayerLayout {
  int inputs;
  int outputs;
  size_t weight_offset;
  size_t bias_offset;
};

std::vector<LayerLayout> ComputeLayout(const ModelConfig& config);

struct ModelWeights {
  ModelConfig config;
  std::vector<double> params;
  int64_t version = 0;

  // Shapes match the config and every entry is finite.
  absl::Status Validate() const;
};

struct Sample {
  std::vector<double> features;
  int label = 0;
};

struct TrainHyper {
  double learning_rate = 0.1;
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  int local_steps = 1;
  int batch_size = 1;

  absl::Status Validate() const;
};

// A device's contribution to one round. Carries no identifier of any kind.
struct GradientUpdate {
  std::vector<double> delta;
  int64_t sample_weight = 1;
  int64_t base_version = 0;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Scores are clamped to [kScoreEpsilon, 1 - kScoreEpsilon] inside the log.
inline constexpr double kScoreEpsilon = 1e-7;

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ModelWeights InitWeights(const ModelConfig& config, uint64_t seed);

absl::StatusOr<double> Forward(const ModelWeights& weights,
                               std::span<const double> features);

double BinaryCrossEntropy(double score, int label);

// Exact backpropagation of the clamped binary cross-entropy for one sample.
// The output-unit error term is (score - label); the clamp only guards the
// logarithm in the reported loss.
absl::StatusOr<LossAndGradient> LossAndGrad(const ModelWeights& weights,
                                            const Sample& sample);

// grad * min(1, clip_norm / ||grad||_2).
std::vector<double> ClipGradient(std::span<const double> grad,
                                 double clip_norm);

double L2Norm(std::span<const double> values);

// Mean of per-sample clipped gradients over a batch.
absl::StatusOr<std::vector<double>> AveragedClippedGradient(
    const ModelWeights& weights, std::span<const Sample> batch,
    double clip_norm);

// Runs hyper.local_steps mini-batch SGD steps starting from `weights`.
//
// Batches are drawn by walking a shuffled index order and reshuffling when it
// is exhausted; a batch never repeats a sample, so its effective size is
// min(batch_size, samples.size()). When `add_noise` is set, every step's
// averaged gradient receives N(0, (noise_multiplier * clip_norm / B)^2) per
// coordinate, B being the effective batch size.
absl::StatusOr<GradientUpdate> LocalTrain(const ModelWeights& weights,
                                          std::span<const Sample> samples,
                                          const TrainHyper& hyper,
                                          bool add_noise, Rng& rng);

// Text serialization. Parameters are written as C99 hex floats, so a
// round-trip is bit-exact. Layout:
//
//   fedsim-weights 1
//   input_dim <n>
//   hidden <count> <w1> <w2> ...
//   version <v>
//   params <count>
//   <one hex float per line>
std::string SerializeWeights(const ModelWeights& weights);
absl::StatusOr<ModelWeights> ParseWeights(std::string_view text);

}  // namespace fedsim

#endif  // FEDSIM_MODEL_H_
