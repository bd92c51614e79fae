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
#include <numeric>

#include <fmt/core.h>

namespace fedsim {
namespace {

absl::Status ValidateFlipProb(double f) {
  if (!(f >= 0.0 && f < 0.5)) {
    return absl::InvalidArgumentError(
        fmt::format("flip probability {} outside [0, 0.5)", f));
  }
  return absl::OkStatus();
}

StatsResult MakeResult(const AnalyticsQuery& query, int64_t ones,
                       int64_t total) {
  const double r = static_cast<double>(ones) / static_cast<double>(total);
  const double width = query.hi - query.lo;
  StatsResult result;
  result.query_id = query.id;
  result.estimate = query.lo + width * DebiasFraction(r, query.flip_prob);
  result.stderr_hint = width * std::sqrt(r * (1.0 - r) / total) /
                       (1.0 - 2.0 * query.flip_prob);
  result.n_reports = total;
  return result;
}

}  // namespace

absl::Status AnalyticsQuery::Validate() const {
  if (!IsValidToken(id) || !IsValidToken(target)) {
    return absl::InvalidArgumentError("query id and target must be tokens");
  }
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    return absl::InvalidArgumentError(
        fmt::format("query '{}' has degenerate range [{}, {}]", id, lo, hi));
  }
  if (absl::Status s = ValidateFlipProb(flip_prob); !s.ok()) return s;
  if (cohort_size < 1) {
    return absl::InvalidArgumentError("cohort_size must be at least 1");
  }
  if (kind == QueryKind::kQuantile && !(quantile > 0.0 && quantile < 1.0)) {
    return absl::InvalidArgumentError("quantile must lie in (0, 1)");
  }
  return absl::OkStatus();
}

LineRecord AnalyticsQuery::ToRecord() const {
  LineRecord r("query");
  r.Add("id", id).Add("target", target);
  r.Add("kind", kind == QueryKind::kMean ? "mean" : "quantile");
  if (kind == QueryKind::kQuantile) r.Add("q", quantile);
  r.Add("lo", lo).Add("hi", hi).Add("flip", flip_prob).Add("cohort",
                                                          cohort_size);
  return r;
}

absl::StatusOr<AnalyticsQuery> AnalyticsQuery::FromRecord(
    const LineRecord& record) {
  if (record.tag() != "query") {
    return absl::InvalidArgumentError("not a query record");
  }
  AnalyticsQuery query;
  absl::StatusOr<std::string> id = record.Get("id");
  absl::StatusOr<std::string> target = record.Get("target");
  absl::StatusOr<std::string> kind = record.Get("kind");
  absl::StatusOr<double> lo = record.GetDouble("lo");
  absl::StatusOr<double> hi = record.GetDouble("hi");
  absl::StatusOr<double> flip = record.GetDouble("flip");
  absl::StatusOr<int64_t> cohort = record.GetInt("cohort");
  for (const absl::Status& s :
       {id.status(), target.status(), kind.status(), lo.status(), hi.status(),
        flip.status(), cohort.status()}) {
    if (!s.ok()) return s;
  }
  query.id = *id;
  query.target = *target;
  if (*kind == "mean") {
    query.kind = QueryKind::kMean;
  } else if (*kind == "quantile") {
    query.kind = QueryKind::kQuantile;
    absl::StatusOr<double> q = record.GetDouble("q");
    if (!q.ok()) return q.status();
    query.quantile = *q;
  } else {
    return absl::InvalidArgumentError(fmt::format("unknown kind {}", *kind));
  }
  query.lo = *lo;
  query.hi = *hi;
  query.flip_prob = *flip;
  query.cohort_size = *cohort;
  if (absl::Status s = query.Validate(); !s.ok()) return s;
  return query;
}

LineRecord BitReport::ToRecord() const {
  LineRecord r("bit_report");
  r.Add("query", query_id).Add("bit", bit);
  return r;
}

LineRecord StatsResult::ToRecord() const {
  LineRecord r("stats");
  r.Add("query", query_id)
      .Add("estimate", estimate)
      .Add("stderr", stderr_hint)
      .Add("n", n_reports);
  return r;
}

absl::StatusOr<StatsResult> StatsResult::FromRecord(const LineRecord& record) {
  if (record.tag() != "stats") {
    return absl::InvalidArgumentError("not a stats record");
  }
  StatsResult result;
  absl::StatusOr<std::string> id = record.Get("query");
  absl::StatusOr<double> estimate = record.GetDouble("estimate");
  absl::StatusOr<double> stderr_hint = record.GetDouble("stderr");
  absl::StatusOr<int64_t> n = record.GetInt("n");
  for (const absl::Status& s :
       {id.status(), estimate.status(), stderr_hint.status(), n.status()}) {
    if (!s.ok()) return s;
  }
  result.query_id = *id;
  result.estimate = *estimate;
  result.stderr_hint = *stderr_hint;
  result.n_reports = *n;
  return result;
}

LineRecord FeatureStat::ToRecord() const {
  LineRecord r("feature_stats");
  r.Add("feature", name)
      .Add("mean", mean)
      .Add("stddev", stddev)
      .Add("lo", lo)
      .Add("hi", hi)
      .Add("n", mean_result.n_reports);
  return r;
}

const FeatureStat* FeatureStats::Find(std::string_view name) const {
  for (const FeatureStat& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

absl::Status KeepPolicy::Validate() const {
  if (!(keep_pos >= 0.0 && keep_pos <= 1.0 && keep_neg >= 0.0 &&
        keep_neg <= 1.0)) {
    return absl::InvalidArgumentError("keep probabilities must be in [0, 1]");
  }
  return absl::OkStatus();
}

LineRecord LabelStats::ToRecord() const {
  LineRecord r("label_stats");
  r.Add("positive_ratio", positive_ratio)
      .Add("keep_pos", policy.keep_pos)
      .Add("keep_neg", policy.keep_neg)
      .Add("n", ratio_result.n_reports);
  return r;
}

absl::StatusOr<LabelStats> LabelStats::FromRecord(const LineRecord& record) {
  if (record.tag() != "label_stats") {
    return absl::InvalidArgumentError("not a label_stats record");
  }
  absl::StatusOr<double> ratio = record.GetDouble("positive_ratio");
  absl::StatusOr<double> keep_pos = record.GetDouble("keep_pos");
  absl::StatusOr<double> keep_neg = record.GetDouble("keep_neg");
  for (const absl::Status& s :
       {ratio.status(), keep_pos.status(), keep_neg.status()}) {
    if (!s.ok()) return s;
  }
  LabelStats stats;
  stats.positive_ratio = *ratio;
  stats.policy = {*keep_pos, *keep_neg};
  if (absl::Status s = stats.policy.Validate(); !s.ok()) return s;
  return stats;
}

int EncodeBit(double value, double lo, double hi, Rng& rng) {
  const double u = std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
  // Uniform() < u is never true for u == 0 and always true for u == 1.
  return rng.Bernoulli(u) ? 1 : 0;
}

int RandomizeBit(int bit, double flip_prob, Rng& rng) {
  return rng.Bernoulli(flip_prob) ? 1 - bit : bit;
}

BitReport MakeMeanReport(double value, const AnalyticsQuery& query, Rng& rng) {
  const int bit = EncodeBit(value, query.lo, query.hi, rng);
  return {query.id, RandomizeBit(bit, query.flip_prob, rng)};
}

BitReport MakeThresholdReport(double value, double threshold,
                              const AnalyticsQuery& query, Rng& rng) {
  const int bit = value <= threshold ? 1 : 0;
  return {query.id, RandomizeBit(bit, query.flip_prob, rng)};
}

double DebiasFraction(double observed, double flip_prob) {
  return std::clamp((observed - flip_prob) / (1.0 - 2.0 * flip_prob), 0.0,
                    1.0);
}

absl::StatusOr<StatsResult> EstimateMean(std::span<const BitReport> reports,
                                         const AnalyticsQuery& query) {
  if (absl::Status s = query.Validate(); !s.ok()) return s;
  if (reports.empty()) {
    return absl::FailedPreconditionError(
        fmt::format("no reports for query '{}'", query.id));
  }
  int64_t ones = 0;
  for (const BitReport& report : reports) {
    if (report.query_id != query.id || (report.bit != 0 && report.bit != 1)) {
      return absl::InvalidArgumentError(
          fmt::format("report does not belong to query '{}'", query.id));
    }
    ones += report.bit;
  }
  return MakeResult(query, ones, static_cast<int64_t>(reports.size()));
}

absl::Status BitAggregator::Add(const BitReport& report) {
  if (report.query_id != query_.id || (report.bit != 0 && report.bit != 1)) {
    return absl::InvalidArgumentError(
        fmt::format("report does not belong to query '{}'", query_.id));
  }
  ones_.fetch_add(report.bit, std::memory_order_relaxed);
  total_.fetch_add(1, std::memory_order_relaxed);
  return absl::OkStatus();
}

absl::StatusOr<StatsResult> BitAggregator::Result() const {
  if (absl::Status s = query_.Validate(); !s.ok()) return s;
  const int64_t total = total_.load();
  if (total == 0) {
    return absl::FailedPreconditionError(
        fmt::format("no reports for query '{}'", query_.id));
  }
  return MakeResult(query_, ones_.load(), total);
}

absl::StatusOr<double> EstimateQuantile(const ThresholdQuery& query, double q,
                                        double lo, double hi, int iterations,
                                        double flip_prob) {
  if (iterations < 1) {
    return absl::InvalidArgumentError("iterations must be at least 1");
  }
  if (!(q > 0.0 && q < 1.0)) {
    return absl::InvalidArgumentError("quantile must lie in (0, 1)");
  }
  if (!(lo < hi)) return absl::InvalidArgumentError("degenerate range");
  if (absl::Status s = ValidateFlipProb(flip_prob); !s.ok()) return s;

  for (int i = 0; i < iterations; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    absl::StatusOr<ThresholdAnswer> answer = query(mid);
    if (!answer.ok()) return answer.status();
    if (answer->n_reports <= 0) {
      return absl::FailedPreconditionError(
          fmt::format("threshold cohort at {} returned no reports", mid));
    }
    if (DebiasFraction(answer->observed_fraction, flip_prob) >= q) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo + 0.5 * (hi - lo);
}

CohortSampler::CohortSampler(size_t pool_size, Mode mode, Rng rng)
    : pool_size_(pool_size), mode_(mode), rng_(std::move(rng)) {
  if (mode_ == Mode::kDisjoint) {
    order_.resize(pool_size_);
    std::iota(order_.begin(), order_.end(), 0);
    rng_.Shuffle(order_);
  }
}

std::vector<size_t> CohortSampler::Next(size_t cohort_size) {
  std::vector<size_t> cohort;
  if (pool_size_ == 0) return cohort;
  if (mode_ == Mode::kWithReplacement) {
    cohort.reserve(cohort_size);
    for (size_t i = 0; i < cohort_size; ++i) {
      cohort.push_back(static_cast<size_t>(rng_.UniformInt(pool_size_)));
    }
    return cohort;
  }
  const size_t take = std::min(cohort_size, order_.size() - cursor_);
  cohort.assign(order_.begin() + cursor_, order_.begin() + cursor_ + take);
  cursor_ += take;
  return cohort;
}

ThresholdQuery MakeCohortThresholdQuery(std::span<const double> values,
                                        CohortSampler& sampler,
                                        const AnalyticsQuery& query, Rng& rng) {
  return [values, &sampler, query,
          &rng](double threshold) -> absl::StatusOr<ThresholdAnswer> {
    std::vector<size_t> cohort =
        sampler.Next(static_cast<size_t>(query.cohort_size));
    int64_t ones = 0;
    for (size_t index : cohort) {
      ones += MakeThresholdReport(values[index], threshold, query, rng).bit;
    }
    ThresholdAnswer answer;
    answer.n_reports = static_cast<int64_t>(cohort.size());
    if (answer.n_reports > 0) {
      answer.observed_fraction =
          static_cast<double>(ones) / static_cast<double>(answer.n_reports);
    }
    return answer;
  };
}

ThresholdQuery MakeExactThresholdQuery(std::span<const double> values) {
  return [values](double threshold) -> absl::StatusOr<ThresholdAnswer> {
    const auto below = std::count_if(values.begin(), values.end(),
                                     [&](double v) { return v <= threshold; });
    ThresholdAnswer answer;
    answer.n_reports = static_cast<int64_t>(values.size());
    if (!values.empty()) {
      answer.observed_fraction =
          static_cast<double>(below) / static_cast<double>(values.size());
    }
    return answer;
  };
}

absl::StatusOr<FeatureStats> ComputeFeatureStats(
    std::span<const FeaturePopulation> populations, double flip_prob,
    Rng& rng) {
  FeatureStats stats;
  for (const FeaturePopulation& population : populations) {
    AnalyticsQuery mean_query;
    mean_query.id = population.name + "_mean";
    mean_query.target = population.name;
    mean_query.lo = population.lo;
    mean_query.hi = population.hi;
    mean_query.flip_prob = flip_prob;
    mean_query.cohort_size =
        std::max<int64_t>(1, static_cast<int64_t>(population.values.size()));
    if (absl::Status s = mean_query.Validate(); !s.ok()) return s;

    AnalyticsQuery square_query = mean_query;
    square_query.id = population.name + "_sq";
    square_query.lo = 0.0;
    square_query.hi = std::max(population.lo * population.lo,
                               population.hi * population.hi);
    if (absl::Status s = square_query.Validate(); !s.ok()) return s;

    BitAggregator mean_agg(mean_query);
    BitAggregator square_agg(square_query);
    for (double x : population.values) {
      const double clamped = std::clamp(x, population.lo, population.hi);
      if (absl::Status s = mean_agg.Add(MakeMeanReport(x, mean_query, rng));
          !s.ok()) {
        return s;
      }
      if (absl::Status s = square_agg.Add(
              MakeMeanReport(clamped * clamped, square_query, rng));
          !s.ok()) {
        return s;
      }
    }
    absl::StatusOr<StatsResult> mean = mean_agg.Result();
    if (!mean.ok()) return mean.status();
    absl::StatusOr<StatsResult> square = square_agg.Result();
    if (!square.ok()) return square.status();

    FeatureStat stat;
    stat.name = population.name;
    stat.lo = population.lo;
    stat.hi = population.hi;
    stat.mean = mean->estimate;
    stat.stddev =
        std::sqrt(std::max(0.0, square->estimate - stat.mean * stat.mean));
    stat.mean_result = *mean;
    stat.second_moment_result = *square;
    stats.features.push_back(std::move(stat));
  }
  return stats;
}

absl::StatusOr<KeepPolicy> LabelBalancePolicy(double positive_ratio,
                                              double target) {
  if (!(target > 0.0 && target <= 0.5)) {
    return absl::InvalidArgumentError("target minority share must be in (0, 0.5]");
  }
  if (!(positive_ratio > 0.0 && positive_ratio < 1.0)) {
    return absl::FailedPreconditionError(fmt::format(
        "label balancing unavailable: positive ratio {} leaves a single class",
        positive_ratio));
  }
  const double minority = std::min(positive_ratio, 1.0 - positive_ratio);
  const double majority = 1.0 - minority;
  KeepPolicy policy;
  if (minority >= target) return policy;
  // Solve minority / (minority + majority * k) = target for k.
  const double keep_majority =
      std::min(1.0, minority * (1.0 - target) / (target * majority));
  if (positive_ratio < 0.5) {
    policy.keep_neg = keep_majority;
  } else {
    policy.keep_pos = keep_majority;
  }
  return policy;
}

absl::StatusOr<LabelStats> ComputeLabelStats(std::span<const int> labels,
                                             double flip_prob, double target,
                                             Rng& rng) {
  AnalyticsQuery query;
  query.id = "label_mean";
  query.target = "label";
  query.lo = 0.0;
  query.hi = 1.0;
  query.flip_prob = flip_prob;
  query.cohort_size = std::max<int64_t>(1, static_cast<int64_t>(labels.size()));
  BitAggregator agg(query);
  for (int label : labels) {
    if (absl::Status s = agg.Add(MakeMeanReport(label, query, rng)); !s.ok()) {
      return s;
    }
  }
  absl::StatusOr<StatsResult> ratio = agg.Result();
  if (!ratio.ok()) return ratio.status();
  absl::StatusOr<KeepPolicy> policy =
      LabelBalancePolicy(ratio->estimate, target);
  if (!policy.ok()) return policy.status();
  LabelStats stats;
  stats.positive_ratio = ratio->estimate;
  stats.policy = *policy;
  stats.ratio_result = *ratio;
  return stats;
}

}  // namespace fedsim
