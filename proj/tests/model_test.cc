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

#include <cmath>
#include <cstring>
#include <vector>

#include <gtest/gtest.h>

namespace fedsim {
namespace {

ModelWeights RandomWeights(const ModelConfig& config, Rng& rng, double scale) {
  ModelWeights w;
  w.config = config;
  w.params.resize(config.ParameterCount());
  for (double& p : w.params) p = rng.UniformIn(-scale, scale);
  return w;
}

Sample RandomSample(int dim, Rng& rng) {
  Sample s;
  for (int i = 0; i < dim; ++i) s.features.push_back(rng.Gaussian());
  s.label = rng.Bernoulli(0.5) ? 1 : 0;
  return s;
}

double LossAt(const ModelWeights& w, const Sample& s) {
  return LossAndGrad(w, s)->loss;
}

TEST(InitWeightsTest, DeterministicPerSeed) {
  ModelConfig config{5, {8, 4}};
  ModelWeights a = InitWeights(config, 42);
  ModelWeights b = InitWeights(config, 42);
  ASSERT_EQ(a.params.size(), b.params.size());
  EXPECT_EQ(0, std::memcmp(a.params.data(), b.params.data(),
                           a.params.size() * sizeof(double)));
  EXPECT_EQ(a.version, 0);
  EXPECT_NE(a.params, InitWeights(config, 43).params);
}

TEST(InitWeightsTest, WithinFanInBound) {
  ModelConfig config{16, {9}};
  ModelWeights w = InitWeights(config, 7);
  for (const LayerLayout& layer : ComputeLayout(config)) {
    const double bound = 1.0 / std::sqrt(layer.inputs);
    for (int i = 0; i < layer.inputs * layer.outputs; ++i) {
      EXPECT_LE(std::abs(w.params[layer.weight_offset + i]), bound);
    }
    for (int o = 0; o < layer.outputs; ++o) {
      EXPECT_EQ(w.params[layer.bias_offset + o], 0.0);
    }
  }
}

TEST(InitWeightsTest, LogisticDegenerateCase) {
  ModelConfig config{6, {}};
  ModelWeights w = InitWeights(config, 1);
  EXPECT_EQ(w.params.size(), 7u);
  std::vector<LayerLayout> layout = ComputeLayout(config);
  ASSERT_EQ(layout.size(), 1u);
  EXPECT_EQ(layout[0].inputs, 6);
  EXPECT_EQ(layout[0].outputs, 1);
}

TEST(ModelConfigTest, RejectsBadShapes) {
  EXPECT_FALSE((ModelConfig{0, {}}).Validate().ok());
  EXPECT_FALSE((ModelConfig{3, {4, 0}}).Validate().ok());
  EXPECT_TRUE((ModelConfig{3, {}}).Validate().ok());
}

TEST(ForwardTest, ZeroWeightsGiveHalf) {
  ModelConfig config{3, {5}};
  ModelWeights w{config, std::vector<double>(config.ParameterCount(), 0.0), 0};
  EXPECT_EQ(*Forward(w, std::vector<double>{1.0, -20.0, 3.0}), 0.5);
}

TEST(ForwardTest, LogisticClosedForm) {
  ModelWeights w{{3, {}}, {0.5, -1.25, 2.0, 0.3}, 0};
  std::vector<double> x = {1.0, 2.0, -0.5};
  const double z = 0.5 * 1.0 - 1.25 * 2.0 + 2.0 * -0.5 + 0.3;
  EXPECT_DOUBLE_EQ(*Forward(w, x), 1.0 / (1.0 + std::exp(-z)));
}

// Straight-line evaluation of a 2-4-1 tanh network, written without loops
// over the parameter layout.
TEST(ForwardTest, TwoFourOneMatchesHandEvaluation) {
  // W1 rows, b1, W2, b2 in layout order.
  std::vector<double> p = {0.1,  -0.2,  // W1 row 0
                           0.4,  0.3,   // W1 row 1
                           -0.5, 0.25,  // W1 row 2
                           0.05, -0.6,  // W1 row 3
                           0.01, -0.02, 0.03, 0.0,  // b1
                           0.7,  -0.3, 0.9, -1.1,   // W2
                           0.15};                   // b2
  ModelWeights w{{2, {4}}, p, 0};
  const double x0 = 1.5, x1 = -0.75;
  const double h0 = std::tanh(0.1 * x0 - 0.2 * x1 + 0.01);
  const double h1 = std::tanh(0.4 * x0 + 0.3 * x1 - 0.02);
  const double h2 = std::tanh(-0.5 * x0 + 0.25 * x1 + 0.03);
  const double h3 = std::tanh(0.05 * x0 - 0.6 * x1 + 0.0);
  const double z = 0.7 * h0 - 0.3 * h1 + 0.9 * h2 - 1.1 * h3 + 0.15;
  const double expected = 1.0 / (1.0 + std::exp(-z));
  EXPECT_NEAR(*Forward(w, std::vector<double>{x0, x1}), expected, 1e-15);
}

TEST(ForwardTest, DimensionMismatch) {
  ModelWeights w = InitWeights({3, {2}}, 1);
  absl::StatusOr<double> r = Forward(w, std::vector<double>{1.0, 2.0});
  EXPECT_EQ(r.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(Forward(w, std::vector<double>{1.0, NAN, 2.0}).ok());
}

TEST(LossAndGradTest, ZeroWeightsLabelOneIsLn2) {
  ModelConfig config{2, {3}};
  ModelWeights w{config, std::vector<double>(config.ParameterCount(), 0.0), 0};
  Sample s{{0.3, -0.4}, 1};
  EXPECT_NEAR(LossAndGrad(w, s)->loss, std::log(2.0), 1e-15);
}

TEST(LossAndGradTest, LogisticGradientClosedForm) {
  ModelWeights w{{3, {}}, {0.2, -0.1, 0.4, 0.05}, 0};
  Sample s{{1.0, -2.0, 0.5}, 0};
  const double score = *Forward(w, s.features);
  absl::StatusOr<LossAndGradient> lg = LossAndGrad(w, s);
  ASSERT_TRUE(lg.ok());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(lg->grad[i], (score - s.label) * s.features[i], 1e-15);
  }
  EXPECT_NEAR(lg->grad[3], score - s.label, 1e-15);
}

// Backprop against central finite differences of the loss.
TEST(LossAndGradTest, MatchesFiniteDifferences) {
  Rng rng(2024);
  const ModelConfig config{4, {6, 3}};
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelWeights w = RandomWeights(config, rng, 0.5);
    Sample s = RandomSample(config.input_dim, rng);
    std::vector<double> analytic = LossAndGrad(w, s)->grad;
    for (size_t i = 0; i < w.params.size(); ++i) {
      ModelWeights plus = w, minus = w;
      plus.params[i] += h;
      minus.params[i] -= h;
      const double numeric = (LossAt(plus, s) - LossAt(minus, s)) / (2 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(LossAndGradTest, RejectsBadLabel) {
  ModelWeights w = InitWeights({2, {}}, 3);
  EXPECT_FALSE(LossAndGrad(w, Sample{{1.0, 1.0}, 2}).ok());
}

TEST(ClipGradientTest, Examples) {
  std::vector<double> inside = {0.3, 0.4};  // norm 0.5
  EXPECT_EQ(ClipGradient(inside, 1.0), inside);

  std::vector<double> clipped = ClipGradient(std::vector<double>{3.0, 4.0}, 1.0);
  EXPECT_NEAR(clipped[0], 0.6, 1e-15);
  EXPECT_NEAR(clipped[1], 0.8, 1e-15);

  std::vector<double> g = {1.0, -2.0, 2.0};
  EXPECT_EQ(ClipGradient(g, L2Norm(g)), g);
}

TEST(ClipGradientTest, NormBoundAndDirection) {
  Rng rng(11);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng.UniformInt(20));
    const double scale = std::exp(rng.UniformIn(-5, 5));
    std::vector<double> g(n);
    for (double& v : g) v = rng.Gaussian() * scale;
    const double c = std::exp(rng.UniformIn(-3, 3));
    std::vector<double> out = ClipGradient(g, c);
    ASSERT_LE(L2Norm(out), c + 1e-12);
    const double ratio = out[0] / g[0];
    for (int i = 0; i < n; ++i) {
      if (g[i] != 0) {
        ASSERT_NEAR(out[i] / g[i], ratio, 1e-12);
      }
    }
  }
}

TEST(SensitivityTest, SingleSampleSubstitutionBounded) {
  Rng rng(5);
  const ModelConfig config{3, {4}};
  for (int batch : {1, 8, 32}) {
    for (int trial = 0; trial < 50; ++trial) {
      ModelWeights w = RandomWeights(config, rng, 2.0);
      const double c = rng.UniformIn(0.05, 2.0);
      std::vector<Sample> a;
      for (int i = 0; i < batch; ++i) {
        Sample s = RandomSample(3, rng);
        for (double& x : s.features) x *= 10;
        a.push_back(s);
      }
      std::vector<Sample> b = a;
      b[rng.UniformInt(batch)] = RandomSample(3, rng);
      std::vector<double> ga = *AveragedClippedGradient(w, a, c);
      std::vector<double> gb = *AveragedClippedGradient(w, b, c);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] -= gb[i];
      EXPECT_LE(L2Norm(ga), 2 * c / batch + 1e-12);
    }
  }
}

TEST(LocalTrainTest, SingleStepIsClippedSgd) {
  ModelWeights w = InitWeights({3, {4}}, 9);
  Sample s{{2.0, -1.0, 0.5}, 1};
  TrainHyper hyper{.learning_rate = 0.3, .clip_norm = 0.1};
  Rng rng(1);
  absl::StatusOr<GradientUpdate> u = LocalTrain(w, {&s, 1}, hyper, true, rng);
  ASSERT_TRUE(u.ok());
  std::vector<double> expected = ClipGradient(LossAndGrad(w, s)->grad, 0.1);
  for (size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(u->delta[i], -0.3 * expected[i], 1e-15);
  }
  EXPECT_EQ(u->sample_weight, 1);
  EXPECT_EQ(u->base_version, w.version);
}

TEST(LocalTrainTest, DeterministicGivenSeed) {
  ModelWeights w = InitWeights({3, {4}}, 9);
  w.version = 5;
  Rng data_rng(3);
  std::vector<Sample> samples;
  for (int i = 0; i < 10; ++i) samples.push_back(RandomSample(3, data_rng));
  TrainHyper hyper{.learning_rate = 0.1, .clip_norm = 1.0,
                   .noise_multiplier = 1.0, .local_steps = 7, .batch_size = 3};
  Rng r1(77), r2(77);
  GradientUpdate a = *LocalTrain(w, samples, hyper, true, r1);
  GradientUpdate b = *LocalTrain(w, samples, hyper, true, r2);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.sample_weight, 10);
  EXPECT_EQ(a.base_version, 5);
  Rng r3(78);
  EXPECT_NE(LocalTrain(w, samples, hyper, true, r3)->delta, a.delta);
}

// Saturating bias makes the score exactly 1.0 in double precision, so
// (score - label) * x vanishes for label 1.
TEST(LocalTrainTest, ZeroGradientSampleGivesZeroDelta) {
  ModelWeights w{{2, {}}, {0.0, 0.0, 40.0}, 0};
  Sample s{{1.0, -1.0}, 1};
  ASSERT_EQ(*Forward(w, s.features), 1.0);
  Rng rng(4);
  GradientUpdate u = *LocalTrain(w, {&s, 1}, TrainHyper{}, false, rng);
  for (double d : u.delta) EXPECT_EQ(d, 0.0);
}

TEST(LocalTrainTest, NoiseOnlyWhenRequested) {
  ModelWeights w = InitWeights({2, {3}}, 2);
  Sample s{{0.5, 0.5}, 0};
  TrainHyper hyper{.noise_multiplier = 2.0};
  Rng r1(8), r2(8);
  GradientUpdate quiet = *LocalTrain(w, {&s, 1}, hyper, false, r1);
  GradientUpdate noisy = *LocalTrain(w, {&s, 1}, hyper, true, r2);
  EXPECT_NE(quiet.delta, noisy.delta);
}

TEST(LocalTrainTest, Errors) {
  ModelWeights w = InitWeights({2, {}}, 2);
  Rng rng(1);
  EXPECT_FALSE(LocalTrain(w, {}, TrainHyper{}, false, rng).ok());
  Sample s{{1.0, 1.0}, 0};
  TrainHyper bad{.learning_rate = -1};
  EXPECT_FALSE(LocalTrain(w, {&s, 1}, bad, false, rng).ok());
}

TEST(SerializationTest, BitExactRoundTrip) {
  Rng rng(99);
  for (const ModelConfig& config :
       {ModelConfig{3, {}}, ModelConfig{5, {7, 2}}, ModelConfig{1, {1}}}) {
    ModelWeights w = RandomWeights(config, rng, 1e3);
    w.params[0] = 5e-324;  // subnormal
    w.params.back() = -0.0;
    w.version = 12;
    absl::StatusOr<ModelWeights> back = ParseWeights(SerializeWeights(w));
    ASSERT_TRUE(back.ok()) << back.status();
    EXPECT_EQ(back->config, w.config);
    EXPECT_EQ(back->version, 12);
    EXPECT_EQ(0, std::memcmp(back->params.data(), w.params.data(),
                             w.params.size() * sizeof(double)));
  }
}

TEST(SerializationTest, RejectsCorruptInput) {
  std::string text = SerializeWeights(InitWeights({2, {}}, 1));
  EXPECT_FALSE(ParseWeights(text.substr(0, text.size() - 8)).ok());
  EXPECT_FALSE(ParseWeights("fedsim-weights 2\n").ok());
  std::string with_nan = text;
  with_nan.replace(with_nan.rfind('\n', with_nan.size() - 2) + 1,
                   std::string::npos, "nan\n");
  EXPECT_FALSE(ParseWeights(with_nan).ok());
}

}  // namespace
}  // namespace fedsim
