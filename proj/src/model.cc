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

#include "fedsim/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "fedsim/record.h"

namespace fedsim {
namespace {

bool AllFinite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Post-activation values of every layer; activations[0] is the input and the
// last entry holds the single pre-sigmoid logit.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  double logit = 0.0;
};

absl::StatusOr<ForwardTrace> RunForward(const ModelWeights& weights,
                                        std::span<const double> features) {
  const ModelConfig& config = weights.config;
  if (static_cast<int>(features.size()) != config.input_dim) {
    return absl::InvalidArgumentError(
        fmt::format("feature length {} does not match input_dim {}",
                    features.size(), config.input_dim));
  }
  if (weights.params.size() != config.ParameterCount()) {
    return absl::InvalidArgumentError("weights do not match model config");
  }
  if (!AllFinite(features)) {
    return absl::InvalidArgumentError("non-finite feature value");
  }
  const std::vector<LayerLayout> layout = ComputeLayout(config);
  ForwardTrace trace;
  trace.activations.emplace_back(features.begin(), features.end());
  for (size_t l = 0; l < layout.size(); ++l) {
    const LayerLayout& layer = layout[l];
    const std::vector<double>& in = trace.activations.back();
    std::vector<double> out(layer.outputs);
    for (int o = 0; o < layer.outputs; ++o) {
      const double* row =
          weights.params.data() + layer.weight_offset + o * layer.inputs;
      double z = weights.params[layer.bias_offset + o];
      for (int i = 0; i < layer.inputs; ++i) z += row[i] * in[i];
      out[o] = z;
    }
    if (l + 1 < layout.size()) {
      for (double& v : out) v = std::tanh(v);
      trace.activations.push_back(std::move(out));
    } else {
      trace.logit = out[0];
    }
  }
  if (!std::isfinite(trace.logit)) {
    return absl::FailedPreconditionError("non-finite logit in forward pass");
  }
  return trace;
}

}  // namespace

absl::Status ModelConfig::Validate() const {
  if (input_dim <= 0) {
    return absl::InvalidArgumentError("input_dim must be positive");
  }
  for (int w : hidden_widths) {
    if (w <= 0) {
      return absl::InvalidArgumentError("hidden widths must be positive");
    }
  }
  return absl::OkStatus();
}

size_t ModelConfig::ParameterCount() const {
  size_t count = 0;
  int in = input_dim;
  for (int w : hidden_widths) {
    count += static_cast<size_t>(w) * in + w;
    in = w;
  }
  return count + in + 1;
}

std::vector<LayerLayout> ComputeLayout(const ModelConfig& config) {
  std::vector<LayerLayout> layout;
  size_t offset = 0;
  int in = config.input_dim;
  auto add = [&](int out) {
    LayerLayout layer{in, out, offset, offset + static_cast<size_t>(out) * in};
    offset = layer.bias_offset + out;
    layout.push_back(layer);
    in = out;
  };
  for (int w : config.hidden_widths) add(w);
  add(1);
  return layout;
}

absl::Status ModelWeights::Validate() const {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  if (params.size() != config.ParameterCount()) {
    return absl::InvalidArgumentError(
        fmt::format("expected {} parameters, got {}", config.ParameterCount(),
                    params.size()));
  }
  if (!AllFinite(params)) {
    return absl::InvalidArgumentError("non-finite model parameter");
  }
  return absl::OkStatus();
}

absl::Status TrainHyper::Validate() const {
  if (!(learning_rate > 0) || !(clip_norm > 0) || !(noise_multiplier >= 0) ||
      !std::isfinite(learning_rate) || !std::isfinite(clip_norm) ||
      !std::isfinite(noise_multiplier)) {
    return absl::InvalidArgumentError(
        "learning_rate and clip_norm must be positive, noise_multiplier "
        "non-negative");
  }
  if (local_steps <= 0 || batch_size <= 0) {
    return absl::InvalidArgumentError(
        "local_steps and batch_size must be positive");
  }
  return absl::OkStatus();
}

ModelWeights InitWeights(const ModelConfig& config, uint64_t seed) {
  ModelWeights weights;
  weights.config = config;
  weights.params.assign(config.ParameterCount(), 0.0);
  Rng rng(seed);
  for (const LayerLayout& layer : ComputeLayout(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
    for (size_t i = 0; i < static_cast<size_t>(layer.outputs) * layer.inputs;
         ++i) {
      weights.params[layer.weight_offset + i] = rng.UniformIn(-bound, bound);
    }
  }
  return weights;
}

absl::StatusOr<double> Forward(const ModelWeights& weights,
                               std::span<const double> features) {
  absl::StatusOr<ForwardTrace> trace = RunForward(weights, features);
  if (!trace.ok()) return trace.status();
  return Sigmoid(trace->logit);
}

double BinaryCrossEntropy(double score, int label) {
  const double p = std::clamp(score, kScoreEpsilon, 1.0 - kScoreEpsilon);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

absl::StatusOr<LossAndGradient> LossAndGrad(const ModelWeights& weights,
                                            const Sample& sample) {
  if (sample.label != 0 && sample.label != 1) {
    return absl::InvalidArgumentError("label must be 0 or 1");
  }
  absl::StatusOr<ForwardTrace> trace = RunForward(weights, sample.features);
  if (!trace.ok()) return trace.status();

  const std::vector<LayerLayout> layout = ComputeLayout(weights.config);
  const double score = Sigmoid(trace->logit);
  LossAndGradient result;
  result.loss = BinaryCrossEntropy(score, sample.label);
  result.grad.assign(weights.params.size(), 0.0);

  // Error term at the pre-activation of the current layer.
  std::vector<double> delta = {score - sample.label};
  for (size_t l = layout.size(); l-- > 0;) {
    const LayerLayout& layer = layout[l];
    const std::vector<double>& in = trace->activations[l];
    for (int o = 0; o < layer.outputs; ++o) {
      double* row = result.grad.data() + layer.weight_offset + o * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) row[i] = delta[o] * in[i];
      result.grad[layer.bias_offset + o] = delta[o];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.inputs, 0.0);
    for (int o = 0; o < layer.outputs; ++o) {
      const double* row =
          weights.params.data() + layer.weight_offset + o * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) prev[i] += row[i] * delta[o];
    }
    for (int i = 0; i < layer.inputs; ++i) {
      prev[i] *= 1.0 - in[i] * in[i];
    }
    delta = std::move(prev);
  }
  if (!std::isfinite(result.loss) || !AllFinite(result.grad)) {
    return absl::FailedPreconditionError("non-finite gradient");
  }
  return result;
}

double L2Norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

std::vector<double> ClipGradient(std::span<const double> grad,
                                 double clip_norm) {
  std::vector<double> out(grad.begin(), grad.end());
  const double norm = L2Norm(grad);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& v : out) v *= scale;
  }
  return out;
}

absl::StatusOr<std::vector<double>> AveragedClippedGradient(
    const ModelWeights& weights, std::span<const Sample> batch,
    double clip_norm) {
  if (batch.empty()) return absl::InvalidArgumentError("empty batch");
  std::vector<double> sum(weights.params.size(), 0.0);
  for (const Sample& sample : batch) {
    absl::StatusOr<LossAndGradient> lg = LossAndGrad(weights, sample);
    if (!lg.ok()) return lg.status();
    std::vector<double> clipped = ClipGradient(lg->grad, clip_norm);
    for (size_t i = 0; i < sum.size(); ++i) sum[i] += clipped[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : sum) v *= inv;
  return sum;
}

absl::StatusOr<GradientUpdate> LocalTrain(const ModelWeights& weights,
                                          std::span<const Sample> samples,
                                          const TrainHyper& hyper,
                                          bool add_noise, Rng& rng) {
  if (samples.empty()) {
    return absl::InvalidArgumentError("local training needs at least 1 sample");
  }
  if (absl::Status s = hyper.Validate(); !s.ok()) return s;
  if (absl::Status s = weights.Validate(); !s.ok()) return s;

  ModelWeights current = weights;
  const size_t batch =
      std::min(static_cast<size_t>(hyper.batch_size), samples.size());
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);
  size_t cursor = 0;
  const double noise_std =
      hyper.noise_multiplier * hyper.clip_norm / static_cast<double>(batch);

  std::vector<Sample> minibatch;
  minibatch.reserve(batch);
  for (int step = 0; step < hyper.local_steps; ++step) {
    if (cursor + batch > order.size()) {
      rng.Shuffle(order);
      cursor = 0;
    }
    minibatch.clear();
    for (size_t i = 0; i < batch; ++i) {
      minibatch.push_back(samples[order[cursor + i]]);
    }
    cursor += batch;
    absl::StatusOr<std::vector<double>> grad =
        AveragedClippedGradient(current, minibatch, hyper.clip_norm);
    if (!grad.ok()) return grad.status();
    if (add_noise && noise_std > 0) {
      for (double& g : *grad) g += rng.Gaussian(0.0, noise_std);
    }
    for (size_t i = 0; i < current.params.size(); ++i) {
      current.params[i] -= hyper.learning_rate * (*grad)[i];
    }
  }

  GradientUpdate update;
  update.delta.resize(weights.params.size());
  for (size_t i = 0; i < update.delta.size(); ++i) {
    update.delta[i] = current.params[i] - weights.params[i];
  }
  update.sample_weight = static_cast<int64_t>(samples.size());
  update.base_version = weights.version;
  return update;
}

std::string SerializeWeights(const ModelWeights& weights) {
  std::string out = "fedsim-weights 1\n";
  out += fmt::format("input_dim {}\n", weights.config.input_dim);
  out += fmt::format("hidden {}", weights.config.hidden_widths.size());
  for (int w : weights.config.hidden_widths) out += fmt::format(" {}", w);
  out += fmt::format("\nversion {}\n", weights.version);
  out += fmt::format("params {}\n", weights.params.size());
  for (double v : weights.params) out += fmt::format("{:a}\n", v);
  return out;
}

absl::StatusOr<ModelWeights> ParseWeights(std::string_view text) {
  std::vector<std::string_view> lines = SplitTokens(text, "\n");
  auto fail = [](std::string_view what) {
    return absl::InvalidArgumentError(
        fmt::format("malformed weights: {}", what));
  };
  if (lines.size() < 5 || lines[0] != "fedsim-weights 1") {
    return fail("missing header");
  }
  auto header_value = [&](size_t index, std::string_view key,
                          int64_t* value) -> bool {
    std::vector<std::string_view> parts = SplitTokens(lines[index], " ");
    return parts.size() == 2 && parts[0] == key && ParseInt64(parts[1], value);
  };
  ModelWeights weights;
  int64_t input_dim;
  if (!header_value(1, "input_dim", &input_dim)) return fail("input_dim");
  weights.config.input_dim = static_cast<int>(input_dim);

  std::vector<std::string_view> hidden = SplitTokens(lines[2], " ");
  int64_t hidden_count;
  if (hidden.size() < 2 || hidden[0] != "hidden" ||
      !ParseInt64(hidden[1], &hidden_count) ||
      hidden.size() != static_cast<size_t>(hidden_count) + 2) {
    return fail("hidden");
  }
  for (size_t i = 2; i < hidden.size(); ++i) {
    int64_t w;
    if (!ParseInt64(hidden[i], &w)) return fail("hidden width");
    weights.config.hidden_widths.push_back(static_cast<int>(w));
  }
  if (!header_value(3, "version", &weights.version)) return fail("version");
  int64_t count;
  if (!header_value(4, "params", &count)) return fail("params");
  if (lines.size() != static_cast<size_t>(count) + 5) {
    return fail("parameter count");
  }
  weights.params.reserve(count);
  for (size_t i = 5; i < lines.size(); ++i) {
    double v;
    if (!ParseDouble(lines[i], &v)) return fail("parameter value");
    weights.params.push_back(v);
  }
  if (absl::Status s = weights.Validate(); !s.ok()) return s;
  return weights;
}

}  // namespace fedsim
