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

// Federated analytics from single-bit, locally randomized device reports.
//
// Client side, a device holding value x for a query over [lo, hi] reports one
// bit:
//
//   u   = clamp((x - lo) / (hi - lo), 0, 1)
//   bit ~ Bernoulli(u)                  (unbiased: E[bit] = u)
//   out = 1 - bit with probability f    (randomized response, eps = ln((1-f)/f))
//
// Server side, the observed mean r of the reported bits is inverted with
// (r - f) / (1 - 2f) and rescaled to [lo, hi]. Quantiles use the same bit
// primitive: each binary-search step asks a fresh cohort for 1{x <= t}.

#ifndef FEDSIM_ANALYTICS_H_
#define FEDSIM_ANALYTICS_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/record.h"
#include "fedsim/rng.h"

namespace fedsim {

enum class QueryKind { kMean, kQuantile };

struct AnalyticsQuery {
  std::string id;
  std::string target;  // feature name or "label"
  QueryKind kind = QueryKind::kMean;
  double quantile = 0.5;  // used when kind == kQuantile
  double lo = 0.0;
  double hi = 1.0;
  double flip_prob = 0.0;
  int64_t cohort_size = 1;

  absl::Status Validate() const;
  LineRecord ToRecord() const;
  static absl::StatusOr<AnalyticsQuery> FromRecord(const LineRecord& record);
};

// The minimal unit a device sends. Deliberately has no device field.
struct BitReport {
  std::string query_id;
  int bit = 0;

  LineRecord ToRecord() const;
};

struct StatsResult {
  std::string query_id;
  double estimate = 0.0;
  double stderr_hint = 0.0;
  int64_t n_reports = 0;

  LineRecord ToRecord() const;
  static absl::StatusOr<StatsResult> FromRecord(const LineRecord& record);
};

struct FeatureStat {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  StatsResult mean_result;
  StatsResult second_moment_result;

  LineRecord ToRecord() const;
};

struct FeatureStats {
  std::vector<FeatureStat> features;

  const FeatureStat* Find(std::string_view name) const;
};

// Per-class probability that a device submits its sample for training.
struct KeepPolicy {
  double keep_pos = 1.0;
  double keep_neg = 1.0;

  absl::Status Validate() const;
};

// Exported to the metadata store and consumed by devices.
struct LabelStats {
  double positive_ratio = 0.5;
  KeepPolicy policy;
  StatsResult ratio_result;

  LineRecord ToRecord() const;
  static absl::StatusOr<LabelStats> FromRecord(const LineRecord& record);
};

// ---- Client-side encoding ----

int EncodeBit(double value, double lo, double hi, Rng& rng);
int RandomizeBit(int bit, double flip_prob, Rng& rng);

BitReport MakeMeanReport(double value, const AnalyticsQuery& query, Rng& rng);
BitReport MakeThresholdReport(double value, double threshold,
                              const AnalyticsQuery& query, Rng& rng);

// ---- Server-side estimation ----

// (r - f) / (1 - 2f), clamped to [0, 1].
double DebiasFraction(double observed, double flip_prob);

absl::StatusOr<StatsResult> EstimateMean(std::span<const BitReport> reports,
                                         const AnalyticsQuery& query);

// Accumulates reports for one query as they arrive. Add() may be called from
// many threads; sums of bits are order-free, so the result does not depend on
// arrival order or partitioning.
class BitAggregator {
 public:
  explicit BitAggregator(AnalyticsQuery query) : query_(std::move(query)) {}

  absl::Status Add(const BitReport& report);
  absl::StatusOr<StatsResult> Result() const;

 private:
  AnalyticsQuery query_;
  std::atomic<int64_t> ones_{0};
  std::atomic<int64_t> total_{0};
};

// Answer of one threshold cohort: mean of the randomized bits 1{x <= t} and
// how many reports produced it.
struct ThresholdAnswer {
  double observed_fraction = 0.0;
  int64_t n_reports = 0;
};

using ThresholdQuery =
    std::function<absl::StatusOr<ThresholdAnswer>(double threshold)>;

// Binary search for the smallest t with CDF(t) >= q over [lo, hi]. Each
// iteration issues one threshold query, debiases its answer with flip_prob
// and halves the interval; the midpoint of the final interval is returned,
// which is within (hi - lo) / 2^iterations of the target quantile when the
// answers are exact.
absl::StatusOr<double> EstimateQuantile(const ThresholdQuery& query, double q,
                                        double lo, double hi, int iterations,
                                        double flip_prob);

// Hands out cohorts of device indices for successive queries.
class CohortSampler {
 public:
  enum class Mode {
    kDisjoint,         // every index is used at most once
    kWithReplacement,  // the pool is treated as a distribution
  };

  CohortSampler(size_t pool_size, Mode mode, Rng rng);

  // Up to `cohort_size` indices; fewer (possibly zero) once a disjoint pool
  // runs dry.
  std::vector<size_t> Next(size_t cohort_size);

 private:
  size_t pool_size_;
  Mode mode_;
  Rng rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

// Threshold query backed by simulated devices: each call draws a fresh
// cohort from `sampler`, and every member reports a randomized 1{x <= t}.
// `values`, `sampler` and `rng` must outlive the returned callable.
ThresholdQuery MakeCohortThresholdQuery(std::span<const double> values,
                                        CohortSampler& sampler,
                                        const AnalyticsQuery& query, Rng& rng);

// Threshold query that returns the exact population fraction, bypassing
// sampling and randomization. Used as an oracle.
ThresholdQuery MakeExactThresholdQuery(std::span<const double> values);

// One feature's analytics cohort: the values held by the sampled devices.
struct FeaturePopulation {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  std::span<const double> values;
};

// Mean from a query over [lo, hi]; variance from a second query for x^2
// (x clamped first) over [0, max(lo^2, hi^2)]; stddev = sqrt(max(0, var)).
absl::StatusOr<FeatureStats> ComputeFeatureStats(
    std::span<const FeaturePopulation> populations, double flip_prob,
    Rng& rng);

// Keep-probabilities that bring the minority share to `target` (in (0, 0.5]).
// The minority class is always kept. Fails when only one class is present.
absl::StatusOr<KeepPolicy> LabelBalancePolicy(double positive_ratio,
                                              double target = 0.5);

// Positive ratio from one mean query over the labels, plus the derived policy.
absl::StatusOr<LabelStats> ComputeLabelStats(std::span<const int> labels,
                                             double flip_prob, double target,
                                             Rng& rng);

}  // namespace fedsim

#endif  // FEDSIM_ANALYTICS_H_
