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

#include "fedsim/analytics.h"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

namespace fedsim {
namespace {

AnalyticsQuery MeanQuery(double lo, double hi, double f) {
  AnalyticsQuery q;
  q.id = "q0";
  q.target = "x";
  q.lo = lo;
  q.hi = hi;
  q.flip_prob = f;
  q.cohort_size = 1;
  return q;
}

std::vector<BitReport> Reports(const std::vector<double>& values,
                               const AnalyticsQuery& query, Rng& rng) {
  std::vector<BitReport> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(MakeMeanReport(v, query, rng));
  return out;
}

// Smallest population value t with fraction(x <= t) >= q.
double SortQuantileOracle(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    if (static_cast<double>(i + 1) / n >= q) return values[i];
  }
  return values.back();
}

TEST(EncodeBitTest, EndpointsAreDeterministic) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(EncodeBit(-2.0, -2.0, 3.0, rng), 0);
    EXPECT_EQ(EncodeBit(3.0, -2.0, 3.0, rng), 1);
    EXPECT_EQ(EncodeBit(-50.0, -2.0, 3.0, rng), 0);  // clamped
    EXPECT_EQ(EncodeBit(50.0, -2.0, 3.0, rng), 1);
  }
}

TEST(EncodeBitTest, MidpointIsFairCoin) {
  Rng rng(2);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += EncodeBit(0.5, -1.0, 2.0, rng);
  EXPECT_NEAR(ones / 100000.0, 0.5, 0.01);
}

TEST(RandomizeBitTest, ZeroFlipIsIdentity) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(RandomizeBit(0, 0.0, rng), 0);
    EXPECT_EQ(RandomizeBit(1, 0.0, rng), 1);
  }
}

TEST(RandomizeBitTest, FlipRate) {
  Rng rng(4);
  int flips = 0;
  for (int i = 0; i < 100000; ++i) flips += RandomizeBit(1, 0.25, rng) == 0;
  EXPECT_NEAR(flips / 100000.0, 0.25, 0.01);
}

// Plug-in mutual information between a uniform input bit and its
// randomization at f = 0.49 (true value about 2e-4 nats).
TEST(RandomizeBitTest, NearHalfFlipLeaksAlmostNothing) {
  Rng rng(5);
  double joint[2][2] = {{0, 0}, {0, 0}};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int in = static_cast<int>(i & 1);
    joint[in][RandomizeBit(in, 0.49, rng)] += 1.0 / n;
  }
  double mi = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double pa = joint[a][0] + joint[a][1];
      const double pb = joint[0][b] + joint[1][b];
      if (joint[a][b] > 0) mi += joint[a][b] * std::log(joint[a][b] / (pa * pb));
    }
  }
  EXPECT_LT(mi, 1e-3);
  EXPECT_NEAR(joint[1][1] / 0.5, 0.51, 0.01);
  EXPECT_NEAR(joint[0][1] / 0.5, 0.49, 0.01);
}

TEST(DebiasFractionTest, Examples) {
  EXPECT_DOUBLE_EQ(DebiasFraction(0.3, 0.0), 0.3);
  EXPECT_DOUBLE_EQ(DebiasFraction(0.5, 0.25), 0.5);
  EXPECT_NEAR(DebiasFraction(0.4, 0.25), 0.3, 1e-15);
  EXPECT_EQ(DebiasFraction(0.1, 0.25), 0.0);  // clamped
  EXPECT_EQ(DebiasFraction(0.95, 0.25), 1.0);
}

TEST(DebiasFractionTest, InvertsRandomizationExpectation) {
  for (double f : {0.0, 0.05, 0.1, 0.25, 0.3, 0.45, 0.49}) {
    // E[randomize(b, f)] = b (1 - f) + (1 - b) f.
    EXPECT_EQ(DebiasFraction(f, f), 0.0);
    EXPECT_NEAR(DebiasFraction(1.0 - f, f), 1.0, 1e-15);
  }
}

TEST(EstimateMeanTest, AllZeroBits) {
  AnalyticsQuery q = MeanQuery(0, 10, 0);
  std::vector<BitReport> reports(50, BitReport{"q0", 0});
  absl::StatusOr<StatsResult> r = EstimateMean(reports, q);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->estimate, 0.0);
  EXPECT_EQ(r->n_reports, 50);
}

TEST(EstimateMeanTest, TwoPointPopulation) {
  std::vector<double> values;
  for (int i = 0; i < 100000; ++i) values.push_back(i % 2 ? 10.0 : 0.0);
  Rng rng(6);
  AnalyticsQuery exact = MeanQuery(0, 10, 0);
  EXPECT_NEAR(EstimateMean(Reports(values, exact, rng), exact)->estimate, 5.0,
              0.1);
  AnalyticsQuery noisy = MeanQuery(0, 10, 0.25);
  EXPECT_NEAR(EstimateMean(Reports(values, noisy, rng), noisy)->estimate, 5.0,
              0.2);
}

TEST(EstimateMeanTest, UnbiasedWithinThreeStderr) {
  Rng rng(7);
  std::vector<double> values;
  double clamped_sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = rng.Gaussian(1.0, 2.0);
    values.push_back(v);
    clamped_sum += std::clamp(v, -2.0, 5.0);
  }
  const double truth = clamped_sum / values.size();
  for (double f : {0.0, 0.1, 0.25}) {
    AnalyticsQuery q = MeanQuery(-2, 5, f);
    absl::StatusOr<StatsResult> r = EstimateMean(Reports(values, q, rng), q);
    ASSERT_TRUE(r.ok());
    EXPECT_LE(std::abs(r->estimate - truth), 3 * r->stderr_hint) << "f=" << f;
  }
}

TEST(EstimateMeanTest, Errors) {
  AnalyticsQuery q = MeanQuery(0, 1, 0);
  EXPECT_EQ(EstimateMean({}, q).status().code(),
            absl::StatusCode::kFailedPrecondition);
  std::vector<BitReport> wrong = {{"other", 1}};
  EXPECT_FALSE(EstimateMean(wrong, q).ok());
  std::vector<BitReport> ok = {{"q0", 1}};
  EXPECT_FALSE(EstimateMean(ok, MeanQuery(1, 1, 0)).ok());
  EXPECT_FALSE(EstimateMean(ok, MeanQuery(0, 1, 0.5)).ok());
}

TEST(BitAggregatorTest, ConcurrentArrivalMatchesBatch) {
  AnalyticsQuery q = MeanQuery(0, 4, 0.1);
  Rng rng(8);
  std::vector<double> values;
  for (int i = 0; i < 40000; ++i) values.push_back(rng.UniformIn(0, 4));
  std::vector<BitReport> reports = Reports(values, q, rng);
  BitAggregator agg(q);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (size_t i = t; i < reports.size(); i += 8) {
        ASSERT_TRUE(agg.Add(reports[i]).ok());
      }
    });
  }
  for (auto& th : threads) th.join();
  StatsResult concurrent = *agg.Result();
  StatsResult batch = *EstimateMean(reports, q);
  EXPECT_EQ(concurrent.estimate, batch.estimate);
  EXPECT_EQ(concurrent.n_reports, batch.n_reports);
}

TEST(EstimateQuantileTest, MedianOfSmallSet) {
  std::vector<double> values = {1, 2, 3, 4, 5};
  absl::StatusOr<double> m =
      EstimateQuantile(MakeExactThresholdQuery(values), 0.5, 0, 8, 16, 0.0);
  ASSERT_TRUE(m.ok());
  EXPECT_NEAR(*m, 3.0, 8.0 / (1 << 16));
  EXPECT_EQ(SortQuantileOracle(values, 0.5), 3.0);
}

TEST(EstimateQuantileTest, DegenerateDistribution) {
  std::vector<double> values(200, 2.75);
  for (double q : {0.1, 0.5, 0.99}) {
    double m = *EstimateQuantile(MakeExactThresholdQuery(values), q, -4, 4, 20,
                                 0.0);
    EXPECT_NEAR(m, 2.75, 8.0 / (1 << 20));
  }
}

TEST(EstimateQuantileTest, ExactFractionsMatchSortOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng.UniformInt(1000);
    std::vector<double> values;
    const bool integers = rng.Bernoulli(0.5);
    for (size_t i = 0; i < n; ++i) {
      values.push_back(integers ? static_cast<double>(rng.UniformInt(20))
                                : rng.UniformIn(-3, 7));
    }
    const double q = rng.UniformIn(0.01, 0.99);
    const int iterations = 1 + static_cast<int>(rng.UniformInt(24));
    const double lo = -3, hi = 20;
    double est = *EstimateQuantile(MakeExactThresholdQuery(values), q, lo, hi,
                                   iterations, 0.0);
    ASSERT_LE(std::abs(est - SortQuantileOracle(values, q)),
              (hi - lo) / std::ldexp(1.0, iterations))
        << "n=" << n << " q=" << q << " iterations=" << iterations;
  }
}

TEST(EstimateQuantileTest, SampledCohortsOnGrid) {
  std::vector<double> grid;
  for (int i = 0; i < 100; ++i) grid.push_back(i);
  AnalyticsQuery q;
  q.id = "p90";
  q.target = "x";
  q.kind = QueryKind::kQuantile;
  q.quantile = 0.9;
  q.lo = 0;
  q.hi = 100;
  q.cohort_size = 50000;
  Rng rng(10);
  CohortSampler sampler(grid.size(), CohortSampler::Mode::kWithReplacement,
                        rng.Fork(1));
  double est = *EstimateQuantile(MakeCohortThresholdQuery(grid, sampler, q, rng),
                                 0.9, 0, 100, 16, 0.0);
  EXPECT_NEAR(est, 90.0, 2.0);
  EXPECT_NEAR(est, SortQuantileOracle(grid, 0.9), 2.0);
}

TEST(EstimateQuantileTest, DisjointCohortsRunDry) {
  std::vector<double> values(100, 1.0);
  AnalyticsQuery q = MeanQuery(0, 2, 0);
  q.cohort_size = 40;
  Rng rng(11);
  CohortSampler sampler(values.size(), CohortSampler::Mode::kDisjoint,
                        rng.Fork(1));
  absl::StatusOr<double> est = EstimateQuantile(
      MakeCohortThresholdQuery(values, sampler, q, rng), 0.5, 0, 2, 5, 0.0);
  EXPECT_EQ(est.status().code(), absl::StatusCode::kFailedPrecondition);
}

TEST(CohortSamplerTest, DisjointNeverRepeats) {
  CohortSampler sampler(1000, CohortSampler::Mode::kDisjoint, Rng(12));
  std::vector<bool> seen(1000, false);
  for (int i = 0; i < 10; ++i) {
    for (size_t idx : sampler.Next(100)) {
      ASSERT_FALSE(seen[idx]);
      seen[idx] = true;
    }
  }
  EXPECT_TRUE(sampler.Next(1).empty());
}

TEST(FeatureStatsTest, ConstantFeature) {
  std::vector<double> values(100000, 3.0);
  FeaturePopulation pop{"c", 0.0, 10.0, values};
  Rng rng(13);
  FeatureStats stats = *ComputeFeatureStats({&pop, 1}, 0.0, rng);
  const FeatureStat& s = stats.features[0];
  EXPECT_LE(std::abs(s.mean - 3.0), 3 * s.mean_result.stderr_hint);
  // Tolerance propagated from both moment estimates.
  const double var_tol = 3 * (s.second_moment_result.stderr_hint +
                              2 * 3.0 * s.mean_result.stderr_hint);
  EXPECT_LE(s.stddev, std::sqrt(var_tol));
}

TEST(FeatureStatsTest, TwoPointPopulation) {
  std::vector<double> values;
  for (int i = 0; i < 100000; ++i) values.push_back(i % 2 ? 1.0 : -1.0);
  FeaturePopulation pop{"pm", -1.0, 1.0, values};
  Rng rng(14);
  FeatureStats stats = *ComputeFeatureStats({&pop, 1}, 0.0, rng);
  EXPECT_NEAR(stats.features[0].mean, 0.0, 0.02);
  EXPECT_NEAR(stats.features[0].stddev, 1.0, 0.02);
  ASSERT_NE(stats.Find("pm"), nullptr);
  EXPECT_EQ(stats.Find("nope"), nullptr);
}

TEST(FeatureStatsTest, StddevNeverNegativeOrNan) {
  Rng rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> values(1 + rng.UniformInt(50),
                               rng.UniformIn(-1, 1));
    FeaturePopulation pop{"f", -1.0, 1.0, values};
    FeatureStats stats = *ComputeFeatureStats({&pop, 1}, 0.4, rng);
    EXPECT_GE(stats.features[0].stddev, 0.0);
    EXPECT_TRUE(std::isfinite(stats.features[0].stddev));
  }
}

TEST(FeatureStatsTest, DegenerateRangeRejected) {
  std::vector<double> values = {1.0};
  FeaturePopulation pop{"f", 1.0, 1.0, values};
  Rng rng(16);
  EXPECT_FALSE(ComputeFeatureStats({&pop, 1}, 0.0, rng).ok());
}

TEST(LabelBalancePolicyTest, Examples) {
  KeepPolicy even = *LabelBalancePolicy(0.5);
  EXPECT_EQ(even.keep_pos, 1.0);
  EXPECT_EQ(even.keep_neg, 1.0);

  KeepPolicy few_pos = *LabelBalancePolicy(0.1);
  EXPECT_EQ(few_pos.keep_pos, 1.0);
  EXPECT_NEAR(few_pos.keep_neg, 1.0 / 9.0, 1e-12);

  KeepPolicy few_neg = *LabelBalancePolicy(0.9);
  EXPECT_NEAR(few_neg.keep_pos, 1.0 / 9.0, 1e-12);
  EXPECT_EQ(few_neg.keep_neg, 1.0);
}

TEST(LabelBalancePolicyTest, ExpectedClassCountsEqual) {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double pi = rng.UniformIn(1e-4, 1 - 1e-4);
    KeepPolicy p = *LabelBalancePolicy(pi);
    ASSERT_NEAR(pi * p.keep_pos, (1 - pi) * p.keep_neg, 1e-12);
    ASSERT_TRUE(p.Validate().ok());
  }
}

TEST(LabelBalancePolicyTest, PartialTarget) {
  // Minority share 0.1 raised to 0.25: k = 0.1 * 0.75 / (0.25 * 0.9).
  KeepPolicy p = *LabelBalancePolicy(0.1, 0.25);
  EXPECT_NEAR(p.keep_neg, 0.075 / 0.225, 1e-12);
  EXPECT_NEAR(0.1 / (0.1 + 0.9 * p.keep_neg), 0.25, 1e-12);
  EXPECT_EQ(LabelBalancePolicy(0.3, 0.25)->keep_neg, 1.0);
}

TEST(LabelBalancePolicyTest, SingleClassUnavailable) {
  EXPECT_EQ(LabelBalancePolicy(0.0).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(LabelBalancePolicy(1.0).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(LabelBalancePolicy(0.2, 0.7).ok());
}

TEST(LabelStatsTest, ImbalancedLabels) {
  std::vector<int> labels;
  for (int i = 0; i < 100000; ++i) labels.push_back(i % 10 == 0 ? 1 : 0);
  Rng rng(18);
  LabelStats stats = *ComputeLabelStats(labels, 0.1, 0.5, rng);
  EXPECT_LE(std::abs(stats.positive_ratio - 0.1),
            3 * stats.ratio_result.stderr_hint);
  EXPECT_NEAR(stats.policy.keep_neg, 1.0 / 9.0, 0.01);
  EXPECT_EQ(stats.policy.keep_pos, 1.0);
}

TEST(RecordsTest, RoundTrip) {
  AnalyticsQuery q = MeanQuery(-1, 3, 0.2);
  q.kind = QueryKind::kQuantile;
  q.quantile = 0.75;
  q.cohort_size = 500;
  absl::StatusOr<AnalyticsQuery> q2 = AnalyticsQuery::FromRecord(
      *LineRecord::Parse(q.ToRecord().ToLine()));
  ASSERT_TRUE(q2.ok()) << q2.status();
  EXPECT_EQ(q2->quantile, 0.75);
  EXPECT_EQ(q2->cohort_size, 500);
  EXPECT_EQ(q2->lo, -1);

  StatsResult r{"q0", 1.25, 0.01, 77};
  StatsResult r2 =
      *StatsResult::FromRecord(*LineRecord::Parse(r.ToRecord().ToLine()));
  EXPECT_EQ(r2.estimate, 1.25);
  EXPECT_EQ(r2.n_reports, 77);

  LabelStats ls;
  ls.positive_ratio = 0.1;
  ls.policy = {1.0, 1.0 / 9};
  LabelStats ls2 =
      *LabelStats::FromRecord(*LineRecord::Parse(ls.ToRecord().ToLine()));
  EXPECT_EQ(ls2.policy.keep_neg, 1.0 / 9);
}

TEST(PrivacyHygieneTest, ExportedAnalyticsRecordsCarryNoIdentity) {
  FeatureStat fs;
  fs.name = "f";
  LabelStats ls;
  for (const LineRecord& r :
       {BitReport{"q", 1}.ToRecord(), StatsResult{"q", 0, 0, 1}.ToRecord(),
        fs.ToRecord(), ls.ToRecord()}) {
    for (const auto& [key, value] : r.fields()) {
      EXPECT_EQ(key.find("device"), std::string::npos) << key;
      EXPECT_EQ(key.find("user"), std::string::npos) << key;
      EXPECT_NE(key, "id") << r.ToLine();
    }
  }
}

}  // namespace
}  // namespace fedsim
