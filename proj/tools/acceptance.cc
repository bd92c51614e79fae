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

// fedsim_acceptance: evaluates the ten acceptance criteria and prints one
// PASS/FAIL line for each. Exit status is 0 only when every line passes.
//
// Tolerances are pinned below; nothing here reads a config file.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "fedsim/aggregation.h"
#include "fedsim/analytics.h"
#include "fedsim/config.h"
#include "fedsim/funnel.h"
#include "fedsim/metrics.h"
#include "fedsim/model.h"
#include "fedsim/rng.h"
#include "fedsim/simulation.h"

namespace fedsim {
namespace {

constexpr double kGradientRelTol = 1e-5;
constexpr double kFiniteDiffStep = 1e-5;
constexpr double kGradientSeconds = 1.0;
constexpr double kRoundoff = 1e-12;
constexpr double kAnalyticsSeconds = 10.0;
constexpr double kQuantileRangeFraction = 0.02;
constexpr double kBalanceTarget = 0.5;
constexpr double kBalanceTolerance = 0.02;
constexpr int64_t kBalanceSessions = 100000;
constexpr double kNormalizationSeconds = 120.0;
constexpr double kAucGap = 0.05;
constexpr double kToyAucTolerance = 0.01;

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

ModelWeights RandomWeights(const ModelConfig& config, Rng& rng, double scale) {
  ModelWeights w;
  w.config = config;
  w.params.resize(config.ParameterCount());
  for (double& p : w.params) p = rng.UniformIn(-scale, scale);
  return w;
}

Sample RandomSample(int dim, double scale, Rng& rng) {
  Sample s;
  for (int i = 0; i < dim; ++i) s.features.push_back(scale * rng.Gaussian());
  s.label = rng.Bernoulli(0.5) ? 1 : 0;
  return s;
}

Verdict GradientExactness() {
  Stopwatch clock;
  Rng rng(101);
  const ModelConfig config{4, {6, 3}};
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    const ModelWeights w = RandomWeights(config, rng, 0.5);
    const Sample s = RandomSample(config.input_dim, 1.0, rng);
    const std::vector<double> analytic = LossAndGrad(w, s)->grad;
    for (size_t i = 0; i < w.params.size(); ++i) {
      ModelWeights plus = w, minus = w;
      plus.params[i] += kFiniteDiffStep;
      minus.params[i] -= kFiniteDiffStep;
      const double numeric =
          (LossAndGrad(plus, s)->loss - LossAndGrad(minus, s)->loss) /
          (2 * kFiniteDiffStep);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  const double seconds = clock.Seconds();
  return {worst < kGradientRelTol && seconds < kGradientSeconds,
          fmt::format("max relative error {:.2e} over 100 pairs (limit {:.0e}), "
                      "{:.3f} s (limit {:.0f} s)",
                      worst, kGradientRelTol, seconds, kGradientSeconds)};
}

Verdict DpMechanics() {
  Rng rng(202);
  double worst_clip = 0.0;  // max ||clip(g)|| / C
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> g(1 + rng.UniformInt(50));
    const double scale = std::exp(rng.UniformIn(-5, 5));
    for (double& v : g) v = scale * rng.Gaussian();
    const double c = std::exp(rng.UniformIn(-3, 3));
    worst_clip = std::max(worst_clip, L2Norm(ClipGradient(g, c)) / c);
  }
  std::string sensitivity;
  bool sensitivity_ok = true;
  const ModelConfig config{3, {4}};
  for (int batch : {1, 8, 32}) {
    double worst = 0.0;  // max ||g(D) - g(D')|| / (2C/B)
    for (int trial = 0; trial < 200; ++trial) {
      const ModelWeights w = RandomWeights(config, rng, 2.0);
      const double c = rng.UniformIn(0.05, 2.0);
      std::vector<Sample> a;
      for (int i = 0; i < batch; ++i) a.push_back(RandomSample(3, 10.0, rng));
      std::vector<Sample> b = a;
      b[rng.UniformInt(batch)] = RandomSample(3, 10.0, rng);
      std::vector<double> ga = *AveragedClippedGradient(w, a, c);
      const std::vector<double> gb = *AveragedClippedGradient(w, b, c);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] -= gb[i];
      worst = std::max(worst, L2Norm(ga) / (2 * c / batch));
    }
    sensitivity_ok = sensitivity_ok && worst <= 1 + kRoundoff;
    sensitivity += fmt::format(" B={}:{:.4f}", batch, worst);
  }
  return {worst_clip <= 1 + kRoundoff && sensitivity_ok,
          fmt::format("max ||clip(g)||/C {:.15f} over 1e4 gradients; "
                      "max substitution shift / (2C/B){} (limit 1)",
                      worst_clip, sensitivity)};
}

Verdict AggregationOracle() {
  Rng rng(303);
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    const int n = 1 + static_cast<int>(rng.UniformInt(100));
    const int d = 1 + static_cast<int>(rng.UniformInt(20));
    std::vector<GradientUpdate> updates;
    for (int i = 0; i < n; ++i) {
      std::vector<double> delta(d);
      for (double& v : delta) v = rng.Gaussian(0, 3);
      updates.push_back(
          {std::move(delta), 1 + static_cast<int64_t>(rng.UniformInt(9)), 0});
    }
    const std::vector<double> avg = *WeightedAverage(updates);
    for (int j = 0; j < d; ++j) {
      long double num = 0, den = 0;
      for (const GradientUpdate& u : updates) {
        num += static_cast<long double>(u.sample_weight) * u.delta[j];
        den += u.sample_weight;
      }
      worst = std::max(worst, std::abs(avg[j] - static_cast<double>(num / den)));
    }
  }

  std::vector<GradientUpdate> submitters;
  for (int i = 0; i < 5; ++i) {
    submitters.push_back({{1.0 + i, -0.5 * i}, i + 1, 0});
  }
  std::vector<int> order = {0, 1, 2, 3, 4};
  int orders = 0, exact = 0;
  do {
    RoundState round(0, 0, 3, 100);
    int accepted = 0;
    for (int i : order) {
      accepted += round.Submit(submitters[i]) == SubmitOutcome::kAccepted;
    }
    const std::vector<GradientUpdate> first = {
        submitters[order[0]], submitters[order[1]], submitters[order[2]]};
    exact += accepted == 3 && round.status() == RoundStatus::kComplete &&
             *WeightedAverage(round.accepted()) == *WeightedAverage(first);
    ++orders;
  } while (std::next_permutation(order.begin(), order.end()));
  return {worst <= kRoundoff && exact == orders && orders == 120,
          fmt::format("max coordinate error {:.2e} over 100 sets (limit 1e-12); "
                      "{}/{} interleavings accepted exactly K=3 of 5",
                      worst, exact, orders)};
}

// Smallest population value t with fraction(x <= t) >= q.
double SortQuantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    if (static_cast<double>(i + 1) / n >= q) return values[i];
  }
  return values.back();
}

Verdict AnalyticsAccuracy() {
  Stopwatch clock;
  Rng rng(404);
  std::vector<double> values;
  double clamped = 0;
  for (int i = 0; i < 100000; ++i) {
    values.push_back(rng.Gaussian(1.0, 2.0));
    clamped += std::clamp(values.back(), -2.0, 5.0);
  }
  const double truth = clamped / static_cast<double>(values.size());
  bool mean_ok = true;
  std::string means;
  for (double f : {0.0, 0.1, 0.25}) {
    AnalyticsQuery q;
    q.id = "mean";
    q.target = "x";
    q.lo = -2;
    q.hi = 5;
    q.flip_prob = f;
    q.cohort_size = static_cast<int64_t>(values.size());
    std::vector<BitReport> reports;
    for (double v : values) reports.push_back(MakeMeanReport(v, q, rng));
    const StatsResult r = *EstimateMean(reports, q);
    const double z = std::abs(r.estimate - truth) / r.stderr_hint;
    mean_ok = mean_ok && z <= 3.0;
    means += fmt::format(" f={}:{:.2f}", f, z);
  }

  double exact_worst = 0.0;  // error / ((hi - lo) / 2^16)
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> sample;
    const size_t n = 1 + rng.UniformInt(2000);
    for (size_t i = 0; i < n; ++i) sample.push_back(rng.UniformIn(-3, 7));
    const double q = rng.UniformIn(0.01, 0.99);
    const double est =
        *EstimateQuantile(MakeExactThresholdQuery(sample), q, -3, 20, 16, 0.0);
    exact_worst = std::max(exact_worst, std::abs(est - SortQuantile(sample, q)) /
                                            (23.0 / 65536.0));
  }

  double cohort_worst = 0.0;  // error / (hi - lo)
  for (double f : {0.0, 0.1}) {
    for (double q : {0.1, 0.5, 0.9}) {
      AnalyticsQuery query;
      query.id = "quantile";
      query.target = "x";
      query.kind = QueryKind::kQuantile;
      query.quantile = q;
      query.lo = -8;
      query.hi = 10;
      query.flip_prob = f;
      query.cohort_size = 50000;
      CohortSampler sampler(values.size(),
                            CohortSampler::Mode::kWithReplacement,
                            rng.Fork(static_cast<uint64_t>(q * 100)));
      const double est = *EstimateQuantile(
          MakeCohortThresholdQuery(values, sampler, query, rng), q, -8, 10, 16,
          f);
      cohort_worst =
          std::max(cohort_worst, std::abs(est - SortQuantile(values, q)) / 18.0);
    }
  }
  const double seconds = clock.Seconds();
  return {mean_ok && exact_worst <= 1.0 &&
              cohort_worst <= kQuantileRangeFraction &&
              seconds < kAnalyticsSeconds,
          fmt::format("mean |err|/stderr{} (limit 3); exact-fraction quantile "
                      "err {:.3f} x range/2^16 (limit 1); cohort-5e4 quantile "
                      "err {:.4f} of range (limit {}); {:.2f} s (limit {:.0f} s)",
                      means, exact_worst, cohort_worst, kQuantileRangeFraction,
                      seconds, kAnalyticsSeconds)};
}

absl::StatusOr<Verdict> LabelBalancing() {
  ExperimentConfig probe;
  probe.population.positive_rate = 0.1;
  probe.population.device_count = kBalanceSessions;
  absl::StatusOr<SubmissionBalance> balance = MeasureSubmissionBalance(probe);
  if (!balance.ok()) return balance.status();
  const double share = balance->PositiveShare();

  ExperimentConfig run;
  run.population.positive_rate = 0.1;
  absl::StatusOr<BalancingComparison> c = ExperimentBalancing(run);
  if (!c.ok()) return c.status();
  return Verdict{
      std::abs(share - kBalanceTarget) <= kBalanceTolerance &&
          balance->sessions >= kBalanceSessions && c->Passed(),
      fmt::format("submitted positive share {:.4f} over {} sessions (target "
                  "0.5 +/- 0.02); entropy {:.4f} -> {:.4f}, central mass "
                  "{:.4f} -> {:.4f} (balanced must be higher)",
                  share, balance->sessions, c->entropy_off, c->entropy_on,
                  c->central_off, c->central_on)};
}

absl::StatusOr<Verdict> Normalization() {
  Stopwatch clock;
  ExperimentConfig config;
  config.population.scale_disparity = 1000;
  absl::StatusOr<NormalizationComparison> c = ExperimentNormalization(config);
  if (!c.ok()) return c.status();
  const double seconds = clock.Seconds();
  return Verdict{
      c->Passed() && seconds < kNormalizationSeconds,
      fmt::format("final loss ratio {:.4f} (limit 0.5); accuracy gain {:+.4f} "
                  "(limit +0.02); un-normalized improvement first third "
                  "{:.4f}, last third {:.4f} (last < 0.1 x first: {}); "
                  "{:.1f} s (limit {:.0f} s)",
                  c->loss_ratio, c->accuracy_gain, c->early_improvement_off,
                  c->late_improvement_off, c->Saturated() ? "yes" : "no",
                  seconds, kNormalizationSeconds)};
}

absl::StatusOr<Verdict> MinimalDegradation() {
  absl::StatusOr<DegradationComparison> c =
      CompareWithBaseline(ExperimentConfig());
  if (!c.ok()) return c.status();
  return Verdict{c->Passed(kAucGap),
                 fmt::format("federated auc {:.4f}, central auc {:.4f}, gap "
                             "{:+.4f} (limit -{})",
                             c->federated_auc, c->baseline_auc,
                             c->federated_auc - c->baseline_auc, kAucGap)};
}

absl::StatusOr<Verdict> FunnelConservation() {
  Rng rng(808);
  size_t violations = 0;
  int64_t faulted = 0;
  for (int scenario = 0; scenario < 50; ++scenario) {
    ExperimentConfig c;
    c.seed = 5000 + scenario;
    c.population.device_count = 200;
    c.eval_devices = 200;
    c.analytics.devices = 1000;
    c.analytics.quantile_cohort = 500;
    c.aggregation.target_updates = 5 + static_cast<int64_t>(rng.UniformInt(20));
    c.aggregation.max_rounds = 3;
    c.faults.battery_drop_rate = rng.Uniform();
    c.faults.network_loss_rate = rng.Uniform();
    c.warmup_ticks = static_cast<int>(rng.UniformInt(3));
    c.eligibility.min_battery = rng.UniformIn(0, 0.9);
    c.eligibility.require_idle = rng.Bernoulli(0.5);
    c.balancing = rng.Bernoulli(0.5);
    absl::StatusOr<RunReport> report = RunSimulation(c);
    if (!report.ok()) return report.status();
    violations += ValidateFunnel(report->funnel_events,
                                 PipelineShape::Training(), kTrainingUseCase)
                      .size();
    for (const StepReport& s : report->funnel.steps) {
      if (s.phase >= 5) faulted += s.failures;
    }
  }

  // Schema fuzz: try to carry a device id in every event field.
  FunnelSink sink;
  if (absl::Status s =
          sink.RegisterUseCase(kTrainingUseCase, PipelineShape::Training());
      !s.ok()) {
    return s;
  }
  const SessionId issued = sink.NewSession(rng);
  int attempts = 0, accepted = 0;
  auto attempt = [&](bool ok) {
    ++attempts;
    accepted += ok;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const uint64_t id = rng.NextU64() | (1ULL << 63);
    const std::string dec = fmt::format("{}", id);
    const std::string hex = fmt::format("{:x}", id);
    const FunnelEvent base{issued, std::string(kTrainingUseCase), 1, 1,
                           StepStatus::kSuccess, FailureReason::kNone, 0};
    FunnelEvent e = base;
    e.session = {id, rng.NextU64()};
    attempt(sink.Log(e).ok());
    for (const std::string& tag : {dec, hex, "u" + hex, "t_" + dec}) {
      e = base;
      e.use_case = tag;
      attempt(sink.Log(e).ok());
      attempt(sink.RegisterUseCase(tag, PipelineShape::Training()).ok());
    }
    e = base;
    e.phase = static_cast<int>(id);
    attempt(sink.Log(e).ok());
    e = base;
    e.step = static_cast<int>(id >> 32);
    attempt(sink.Log(e).ok());
    e = base;
    e.time_bucket = static_cast<int64_t>(id >> 1);
    attempt(sink.Log(e).ok());
    e = base;
    e.status = StepStatus::kFailure;
    e.reason = static_cast<FailureReason>(id % 1000 + 100);
    attempt(sink.Log(e).ok());
    attempt(ParseFunnelEvents(base.ToRecord().ToLine() + " device=" + dec).ok());
  }
  return Verdict{violations == 0 && accepted == 0 && faulted > 0,
                 fmt::format("{} violations over 50 fault scenarios ({} "
                             "injected failures); device-id fuzz {}/{} "
                             "accepted (limit 0)",
                             violations, faulted, accepted, attempts)};
}

absl::StatusOr<Verdict> Determinism() {
  const ExperimentConfig config;
  absl::StatusOr<RunReport> a = RunSimulation(config);
  absl::StatusOr<RunReport> b = RunSimulation(config);
  if (!a.ok()) return a.status();
  if (!b.ok()) return b.status();
  const std::string ta = a->Serialize(false) + a->FunnelEventsText();
  const std::string tb = b->Serialize(false) + b->FunnelEventsText();
  return Verdict{ta == tb, fmt::format("two runs, {} vs {} bytes, {}",
                                       ta.size(), tb.size(),
                                       ta == tb ? "identical" : "different")};
}

double PairwiseAuc(const std::vector<double>& scores,
                   const std::vector<int>& labels) {
  double wins = 0, pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      pairs += 1;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

// Scores from the first toy set are the criterion; the remaining sets check
// that every deviation is the grid's own discretization: only a (pos, neg)
// pair with distinct scores in one grid cell can be misordered, by 1/2 each.
absl::StatusOr<Verdict> EvalMetrics() {
  Rng rng(1010);
  double first_error = 0.0;
  int unexplained = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
      labels.push_back(i < 10 ? 1 : 0);
      scores.push_back(std::clamp(rng.Gaussian(labels.back() ? 0.6 : 0.4, 0.2),
                                  0.0, 1.0));
    }
    std::vector<EvalReport> reports;
    for (int d = 0; d < 4; ++d) {
      absl::StatusOr<EvalReport> r = MakeEvalReport(
          std::vector<double>(scores.begin() + 5 * d,
                              scores.begin() + 5 * d + 5),
          std::vector<int>(labels.begin() + 5 * d, labels.begin() + 5 * d + 5),
          ThresholdGrid(101));
      if (!r.ok()) return r.status();
      reports.push_back(std::move(*r));
    }
    absl::StatusOr<NoisedMetrics> m = AggregateEval(reports, 0.0, rng);
    if (!m.ok()) return m.status();
    const double error = std::abs(m->auc - PairwiseAuc(scores, labels));
    if (trial == 0) first_error = error;
    double shared = 0;
    for (int i = 0; i < 10; ++i) {
      for (int j = 10; j < 20; ++j) {
        shared += std::floor(scores[i] * 100) == std::floor(scores[j] * 100) &&
                  scores[i] != scores[j];
      }
    }
    unexplained += error > 0.5 * shared / 100 + kRoundoff;
  }
  return Verdict{first_error <= kToyAucTolerance + kRoundoff && unexplained == 0,
                 fmt::format("|aggregated - pairwise| auc {:.6f} on the "
                             "20-sample toy set (limit {}); {} of 100 sets "
                             "exceed the shared-cell bound (limit 0)",
                             first_error, kToyAucTolerance, unexplained)};
}

}  // namespace
}  // namespace fedsim

int main() {
  using fedsim::Verdict;
  const std::vector<std::pair<const char*, std::function<absl::StatusOr<Verdict>()>>>
      criteria = {
          {"gradient exactness", [] { return fedsim::GradientExactness(); }},
          {"dp mechanics", [] { return fedsim::DpMechanics(); }},
          {"aggregation oracle", [] { return fedsim::AggregationOracle(); }},
          {"analytics accuracy", [] { return fedsim::AnalyticsAccuracy(); }},
          {"label balancing", fedsim::LabelBalancing},
          {"normalization", fedsim::Normalization},
          {"minimal degradation", fedsim::MinimalDegradation},
          {"funnel conservation", fedsim::FunnelConservation},
          {"determinism", fedsim::Determinism},
          {"eval metrics", fedsim::EvalMetrics},
      };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    absl::StatusOr<Verdict> v = criteria[i].second();
    if (!v.ok()) v = Verdict{false, "error: " + v.status().ToString()};
    failed += !v->pass;
    fmt::print("{} C{:<2} {}: {}\n", v->pass ? "PASS" : "FAIL", i + 1,
               criteria[i].first, v->detail);
    std::fflush(stdout);
  }
  fmt::print("{} criteria evaluated, {} passed, {} failed\n", criteria.size(),
             criteria.size() - failed, failed);
  return failed == 0 ? 0 : 1;
}
