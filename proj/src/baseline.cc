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

#include "fedsim/baseline.h"

#include <cmath>

#include "fedsim/metrics.h"
#include "fedsim/rng.h"

namespace fedsim {

std::vector<double> AugmentedFeatures(const FeatureSchema& schema,
                                      const LocalExample& example) {
  std::vector<double> x(schema.size(), 0.0);
  for (size_t j = 0; j < schema.size(); ++j) {
    const std::string& name = schema.features()[j].name;
    if (auto it = example.signals.find(name); it != example.signals.end()) {
      x[j] = it->second;
    } else if (auto s = example.server_features.find(name);
               s != example.server_features.end()) {
      x[j] = s->second;
    }
  }
  return x;
}

absl::StatusOr<std::vector<Sample>> CollectSamples(
    const Population& population) {
  std::vector<Sample> samples;
  for (const DeviceState& device : population.devices) {
    absl::StatusOr<std::vector<LocalExample>> examples = LoadExamples(device);
    if (!examples.ok()) return examples.status();
    for (const LocalExample& ex : *examples) {
      samples.push_back({AugmentedFeatures(population.schema, ex), ex.label});
    }
  }
  return samples;
}

absl::StatusOr<BaselineMetrics> CentralBaseline(
    const Population& train, const Population& eval,
    const BaselineOptions& options) {
  absl::StatusOr<std::vector<Sample>> train_samples = CollectSamples(train);
  if (!train_samples.ok()) return train_samples.status();
  absl::StatusOr<std::vector<Sample>> eval_samples = CollectSamples(eval);
  if (!eval_samples.ok()) return eval_samples.status();
  if (train_samples->empty() || eval_samples->empty()) {
    return absl::InvalidArgumentError("baseline needs non-empty data");
  }
  const size_t d = train.schema.size();

  if (options.normalize) {
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    const double n = static_cast<double>(train_samples->size());
    for (const Sample& s : *train_samples) {
      for (size_t j = 0; j < d; ++j) mean[j] += s.features[j] / n;
    }
    for (const Sample& s : *train_samples) {
      for (size_t j = 0; j < d; ++j) {
        sd[j] += (s.features[j] - mean[j]) * (s.features[j] - mean[j]) / n;
      }
    }
    for (double& v : sd) v = std::sqrt(v);
    auto apply = [&](std::vector<Sample>& samples) {
      for (Sample& s : samples) {
        for (size_t j = 0; j < d; ++j) {
          s.features[j] = sd[j] > 0 ? (s.features[j] - mean[j]) / sd[j] : 0.0;
        }
      }
    };
    apply(*train_samples);
    apply(*eval_samples);
  }

  Rng rng(options.seed);
  std::vector<Sample> fit = *train_samples;
  if (options.balance) {
    std::vector<Sample> pos, neg;
    for (Sample& s : fit) (s.label == 1 ? pos : neg).push_back(std::move(s));
    if (pos.empty() || neg.empty()) {
      return absl::FailedPreconditionError(
          "cannot balance a single-class training set");
    }
    std::vector<Sample>& majority = pos.size() > neg.size() ? pos : neg;
    const size_t keep = std::min(pos.size(), neg.size());
    rng.Shuffle(majority);
    majority.resize(keep);
    fit = std::move(pos);
    fit.insert(fit.end(), neg.begin(), neg.end());
  }

  ModelConfig config = options.model;
  if (config.input_dim == 0) config.input_dim = static_cast<int>(d);
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  ModelWeights weights = InitWeights(config, options.seed);
  TrainHyper hyper = options.hyper;
  hyper.noise_multiplier = 0;
  const size_t batch =
      std::min(fit.size(), static_cast<size_t>(std::max(1, hyper.batch_size)));
  hyper.local_steps = std::max<int>(
      1, static_cast<int>(options.epochs * fit.size() / batch));
  absl::StatusOr<GradientUpdate> update =
      LocalTrain(weights, fit, hyper, /*add_noise=*/false, rng);
  if (!update.ok()) return update.status();
  for (size_t i = 0; i < weights.params.size(); ++i) {
    weights.params[i] += update->delta[i];
  }

  std::vector<double> scores;
  std::vector<int> labels;
  double loss = 0, correct = 0;
  for (const Sample& s : *eval_samples) {
    absl::StatusOr<double> p = Forward(weights, s.features);
    if (!p.ok()) return p.status();
    scores.push_back(*p);
    labels.push_back(s.label);
    loss += BinaryCrossEntropy(*p, s.label);
    correct += ((*p >= 0.5) == (s.label == 1)) ? 1 : 0;
  }
  const double n = static_cast<double>(eval_samples->size());
  BaselineMetrics m;
  m.auc = ExactAuc(scores, labels);
  m.accuracy = correct / n;
  m.loss = loss / n;
  m.train_samples = static_cast<int64_t>(fit.size());
  m.eval_samples = static_cast<int64_t>(eval_samples->size());
  return m;
}

}  // namespace fedsim
