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

#include "fedsim/simulation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

namespace fedsim {
namespace {

// Stream ids for Rng::Fork off the run seed.
enum Stream : uint64_t {
  kTrainFleet = 11,
  kAnalyticsFleet = 12,
  kEvalFleet = 13,
  kAnalytics = 21,
  kModelInit = 31,
  kMetricNoise = 41,
  kTeeNoise = 42,
  kSubmissionProbe = 51,
  kPolicyRefresh = 61,
  kRoundBase = 1000,
};

void RerollDynamicResources(DeviceState& device, Rng& rng) {
  device.battery = rng.Uniform();
  const double net = rng.Uniform();
  device.network = net < 0.7   ? NetworkClass::kUnmetered
                   : net < 0.9 ? NetworkClass::kMetered
                               : NetworkClass::kOffline;
  device.idle = rng.Bernoulli(0.8);
}

ModelConfig ResolvedModel(const ExperimentConfig& config) {
  ModelConfig m = config.model;
  if (m.input_dim == 0) {
    m.input_dim = static_cast<int>(config.population.true_weights.size());
  }
  return m;
}

double SortedQuantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (static_cast<double>(i + 1) / n >= q) return values[i];
  }
  return values.back();
}

// Each analytics device answers label queries with its first example.
absl::StatusOr<std::vector<int>> FirstExampleLabels(const Population& fleet) {
  std::vector<int> labels;
  for (const DeviceState& device : fleet.devices) {
    absl::StatusOr<std::vector<LocalExample>> examples = LoadExamples(device);
    if (!examples.ok()) return examples.status();
    if (!examples->empty()) labels.push_back(examples->front().label);
  }
  return labels;
}

// Held-out devices with their transformed inputs, computed once per run.
struct EvalSet {
  std::vector<std::vector<std::vector<double>>> features;  // per device
  std::vector<std::vector<int>> labels;
};

absl::StatusOr<EvalSet> PrepareEval(const Population& eval,
                                    const CompiledTransform& transform) {
  EvalSet set;
  for (const DeviceState& device : eval.devices) {
    absl::StatusOr<std::vector<LocalExample>> examples = LoadExamples(device);
    if (!examples.ok()) return examples.status();
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const LocalExample& ex : *examples) {
      x.push_back(transform.Apply(ex.server_features, ex.signals).features);
      y.push_back(ex.label);
    }
    set.features.push_back(std::move(x));
    set.labels.push_back(std::move(y));
  }
  return set;
}

absl::StatusOr<EvalPoint> Evaluate(const ModelWeights& model,
                                   const EvalSet& set,
                                   const std::vector<double>& grid,
                                   double noise_std, Rng& rng) {
  std::vector<EvalReport> reports;
  std::vector<double> all_scores;
  std::vector<int> all_labels;
  for (size_t d = 0; d < set.features.size(); ++d) {
    std::vector<double> scores;
    for (const std::vector<double>& x : set.features[d]) {
      absl::StatusOr<double> p = Forward(model, x);
      if (!p.ok()) return p.status();
      scores.push_back(*p);
    }
    absl::StatusOr<EvalReport> r = MakeEvalReport(scores, set.labels[d], grid);
    if (!r.ok()) return r.status();
    reports.push_back(std::move(*r));
    all_scores.insert(all_scores.end(), scores.begin(), scores.end());
    all_labels.insert(all_labels.end(), set.labels[d].begin(),
                      set.labels[d].end());
  }
  absl::StatusOr<NoisedMetrics> noised = AggregateEval(reports, noise_std, rng);
  if (!noised.ok()) return noised.status();
  EvalPoint point;
  point.version = model.version;
  point.noised = std::move(*noised);
  point.exact_auc = ExactAuc(all_scores, all_labels);
  double loss = 0, correct = 0;
  for (size_t i = 0; i < all_scores.size(); ++i) {
    loss += BinaryCrossEntropy(all_scores[i], all_labels[i]);
    correct += (all_scores[i] >= 0.5) == (all_labels[i] == 1);
  }
  point.exact_loss = loss / static_cast<double>(all_scores.size());
  point.exact_accuracy = correct / static_cast<double>(all_scores.size());
  return point;
}

LineRecord HistogramRecord(std::string_view tag, int64_t version,
                           const ScoreHistogram& h) {
  LineRecord r{std::string(tag)};
  r.Add("round", version);
  for (int b = 0; b < kHistogramBins; ++b) {
    r.Add(fmt::format("bin_{:02d}", b), h[b]);
  }
  return r;
}

std::string CurveText(const std::vector<double>& values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ' ';
    out += fmt::format("{:.4f}", v);
  }
  return out;
}

}  // namespace

absl::StatusOr<Fleets> MakeFleets(const ExperimentConfig& config) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  const Rng root(config.seed);
  PopulationConfig pc = config.population;
  Fleets fleets;
  pc.seed = root.Fork(kTrainFleet).NextU64();
  absl::StatusOr<Population> train = GeneratePopulation(pc);
  if (!train.ok()) return train.status();
  pc.device_count = config.analytics.devices;
  pc.seed = root.Fork(kAnalyticsFleet).NextU64();
  absl::StatusOr<Population> analytics = GeneratePopulation(pc);
  if (!analytics.ok()) return analytics.status();
  pc.device_count = config.eval_devices;
  pc.seed = root.Fork(kEvalFleet).NextU64();
  absl::StatusOr<Population> eval = GeneratePopulation(pc);
  if (!eval.ok()) return eval.status();
  fleets.train = std::move(*train);
  fleets.analytics = std::move(*analytics);
  fleets.eval = std::move(*eval);
  return fleets;
}

std::vector<LineRecord> AnalyticsSummary::ToRecords(
    bool production_mode) const {
  std::vector<LineRecord> out;
  for (const FeatureStat& f : features.features) out.push_back(f.ToRecord());
  for (const FeatureQuantile& m : medians) {
    LineRecord r("feature_quantile");
    r.Add("feature", m.feature).Add("q", m.q).Add("estimate", m.estimate);
    out.push_back(std::move(r));
  }
  if (labels) {
    out.push_back(labels->ToRecord());
  } else {
    LineRecord r("label_stats_unavailable");
    r.Add("reason", "single_class");
    out.push_back(std::move(r));
  }
  if (production_mode) return out;
  for (size_t j = 0; j < oracle_moments.size(); ++j) {
    LineRecord r("oracle_feature");
    r.Add("feature", features.features[j].name)
        .Add("mean", oracle_moments[j].first)
        .Add("stddev", oracle_moments[j].second);
    out.push_back(std::move(r));
  }
  for (const FeatureQuantile& m : medians) {
    LineRecord r("oracle_feature_quantile");
    r.Add("feature", m.feature).Add("q", m.q).Add("value", m.oracle);
    out.push_back(std::move(r));
  }
  LineRecord label("oracle_label");
  label.Add("positive_ratio", oracle_positive_ratio);
  out.push_back(std::move(label));
  return out;
}

absl::StatusOr<AnalyticsSummary> RunAnalytics(const ExperimentConfig& config,
                                              const Fleets& fleets) {
  const FeatureSchema& schema = fleets.analytics.schema;
  absl::StatusOr<CompiledTransform> raw =
      CompiledTransform::Load(MakeStandardSpec(schema, nullptr, 0), schema);
  if (!raw.ok()) return raw.status();

  // One report per device per query: each device answers with its first
  // local example.
  std::vector<std::vector<double>> values(schema.size());
  std::vector<int> labels;
  for (const DeviceState& device : fleets.analytics.devices) {
    absl::StatusOr<std::vector<LocalExample>> examples = LoadExamples(device);
    if (!examples.ok()) return examples.status();
    if (examples->empty()) continue;
    const LocalExample& ex = examples->front();
    const TransformResult t = raw->Apply(ex.server_features, ex.signals);
    for (size_t j = 0; j < schema.size(); ++j) {
      values[j].push_back(t.features[j]);
    }
    labels.push_back(ex.label);
  }
  if (labels.empty()) {
    return absl::FailedPreconditionError("analytics fleet holds no data");
  }

  Rng rng = Rng(config.seed).Fork(kAnalytics);
  const double f = config.analytics.flip_prob;
  std::vector<FeaturePopulation> pops;
  for (size_t j = 0; j < schema.size(); ++j) {
    const FeatureDescriptor& d = schema.features()[j];
    pops.push_back({d.name, d.lo, d.hi, values[j]});
  }
  AnalyticsSummary summary;
  absl::StatusOr<FeatureStats> stats = ComputeFeatureStats(pops, f, rng);
  if (!stats.ok()) return stats.status();
  summary.features = std::move(*stats);

  absl::StatusOr<LabelStats> label_stats = ComputeLabelStats(
      labels, f, config.analytics.balance_target, rng);
  if (label_stats.ok()) {
    summary.labels = *label_stats;
  } else if (label_stats.status().code() !=
             absl::StatusCode::kFailedPrecondition) {
    return label_stats.status();
  }

  for (size_t j = 0; j < schema.size(); ++j) {
    const FeatureDescriptor& d = schema.features()[j];
    AnalyticsQuery query;
    query.id = d.name + "_p50";
    query.target = d.name;
    query.kind = QueryKind::kQuantile;
    query.quantile = 0.5;
    query.lo = d.lo;
    query.hi = d.hi;
    query.flip_prob = f;
    query.cohort_size = config.analytics.quantile_cohort;
    CohortSampler sampler(values[j].size(),
                          CohortSampler::Mode::kWithReplacement,
                          rng.Fork(100 + j));
    absl::StatusOr<double> median = EstimateQuantile(
        MakeCohortThresholdQuery(values[j], sampler, query, rng), 0.5, d.lo,
        d.hi, config.analytics.quantile_iterations, f);
    if (!median.ok()) return median.status();
    summary.medians.push_back(
        {d.name, 0.5, *median, SortedQuantile(values[j], 0.5)});

    const double n = static_cast<double>(values[j].size());
    const double mean =
        std::accumulate(values[j].begin(), values[j].end(), 0.0) / n;
    double var = 0;
    for (double v : values[j]) var += (v - mean) * (v - mean) / n;
    summary.oracle_moments.emplace_back(mean, std::sqrt(var));
  }
  summary.oracle_positive_ratio =
      std::accumulate(labels.begin(), labels.end(), 0.0) /
      static_cast<double>(labels.size());
  return summary;
}

absl::StatusOr<RunReport> RunSimulation(const ExperimentConfig& config) {
  absl::StatusOr<Fleets> fleets = MakeFleets(config);
  if (!fleets.ok()) return fleets.status();
  RunReport report;
  absl::StatusOr<AnalyticsSummary> analytics = RunAnalytics(config, *fleets);
  if (!analytics.ok()) return analytics.status();
  report.analytics = std::move(*analytics);

  KeepPolicy policy;
  if (config.balancing) {
    if (!report.analytics.labels) {
      return absl::FailedPreconditionError(
          "balancing is on but the label statistics show a single class");
    }
    policy = report.analytics.labels->policy;
  }

  const FeatureSchema& schema = fleets->train.schema;
  report.spec = MakeStandardSpec(
      schema, config.normalization ? &report.analytics.features : nullptr, 1);
  absl::StatusOr<CompiledTransform> transform =
      CompiledTransform::Load(report.spec, schema);
  if (!transform.ok()) return transform.status();

  const Rng root(config.seed);
  const ModelConfig model_config = ResolvedModel(config);
  AggregationServer server(
      InitWeights(model_config, root.Fork(kModelInit).NextU64()),
      config.aggregation);

  report.metadata.criteria = config.eligibility;
  report.metadata.model_version = server.model().version();
  report.metadata.spec_version = report.spec.version;
  report.metadata.policy = policy;
  report.metadata.purpose = std::string(kTrainingUseCase);

  FunnelSink sink;
  if (absl::Status s =
          sink.RegisterUseCase(kTrainingUseCase, PipelineShape::Training());
      !s.ok()) {
    return s;
  }

  absl::StatusOr<EvalSet> eval_set = PrepareEval(fleets->eval, *transform);
  if (!eval_set.ok()) return eval_set.status();
  const std::vector<double> grid = ThresholdGrid(config.threshold_points);
  Rng metric_rng = root.Fork(kMetricNoise);
  Rng tee_rng = root.Fork(kTeeNoise);
  absl::StatusOr<EvalPoint> initial = Evaluate(
      server.model().weights, *eval_set, grid, config.metric_noise_std,
      metric_rng);
  if (!initial.ok()) return initial.status();
  report.evals.push_back(std::move(*initial));

  absl::StatusOr<std::vector<int>> refresh_labels =
      FirstExampleLabels(fleets->analytics);
  if (!refresh_labels.ok()) return refresh_labels.status();
  Rng refresh_rng = root.Fork(kPolicyRefresh);

  std::vector<DeviceState>& devices = fleets->train.devices;
  int consecutive_abandoned = 0;
  int64_t eligible_sessions = 0;
  for (int64_t attempt = 0;
       ShouldStop(server.model().history, config.aggregation) ==
       StopReason::kContinue;
       ++attempt) {
    if (config.balancing && attempt > 0) {
      // A refresh that happens to see one class keeps the previous policy.
      absl::StatusOr<LabelStats> fresh =
          ComputeLabelStats(*refresh_labels, config.analytics.flip_prob,
                            config.analytics.balance_target, refresh_rng);
      if (fresh.ok()) policy = fresh->policy;
    }
    report.round_policies.push_back(policy);
    absl::StatusOr<std::shared_ptr<RoundState>> round = server.OpenRound();
    if (!round.ok()) return round.status();
    Rng round_rng = root.Fork(kRoundBase + static_cast<uint64_t>(attempt));
    std::vector<size_t> order(devices.size());
    std::iota(order.begin(), order.end(), 0);
    round_rng.Shuffle(order);
    const ModelWeights snapshot = server.model().weights;

    SessionContext context;
    context.snapshot = &snapshot;
    context.transform = &*transform;
    context.hyper = config.train;
    context.noise_on_device =
        config.aggregation.noise_placement == NoisePlacement::kDevice;
    context.policy = policy;
    context.criteria = config.eligibility;
    context.warmup_ticks = config.warmup_ticks;
    context.use_case = std::string(kTrainingUseCase);
    context.time_bucket = std::min<int64_t>(attempt, kMaxTimeBucket);
    context.sink = &sink;

    for (size_t index : order) {
      (*round)->Advance(1);
      if ((*round)->status() != RoundStatus::kOpen) break;
      DeviceState& device = devices[index];
      RerollDynamicResources(device, round_rng);
      device.signal_ticks = static_cast<int>(attempt + 1);
      SessionFaults faults;
      faults.battery_drop = round_rng.Bernoulli(config.faults.battery_drop_rate);
      faults.network_loss = round_rng.Bernoulli(config.faults.network_loss_rate);
      SessionOutcome outcome =
          RunTrainingSession(device, context, faults, round_rng);
      ++report.sessions;
      eligible_sessions += outcome.failed_phase != kPhaseEligibility;
      report.submitted_positive += outcome.submitted_positive;
      report.submitted_negative += outcome.submitted_negative;
      if (outcome.update) (*round)->Submit(std::move(*outcome.update));
      if ((*round)->status() != RoundStatus::kOpen) break;
    }

    if ((*round)->status() == RoundStatus::kComplete) {
      if (absl::Status s = server.Aggregate(tee_rng); !s.ok()) return s;
      absl::StatusOr<EvalPoint> point =
          Evaluate(server.model().weights, *eval_set, grid,
                   config.metric_noise_std, metric_rng);
      if (!point.ok()) return point.status();
      server.RecordEvalAccuracy(point->noised.accuracy);
      report.evals.push_back(std::move(*point));
      consecutive_abandoned = 0;
      continue;
    }
    if (absl::Status s = server.AbandonRound(); !s.ok()) return s;
    if (++consecutive_abandoned >= config.max_consecutive_abandoned) {
      report.status = "aborted";
      report.stop_reason =
          eligible_sessions == 0 ? "all_sessions_ineligible" : "round_timeout";
      break;
    }
  }
  if (report.status == "completed") {
    report.stop_reason = std::string(
        StopReasonName(ShouldStop(server.model().history, config.aggregation)));
  }
  report.rounds = server.model().history;
  report.final_model = server.model().weights;
  report.funnel_events = sink.Snapshot();
  report.funnel = DropoffReport(report.funnel_events, PipelineShape::Training(),
                                kTrainingUseCase);
  return report;
}

std::string RunReport::Serialize(bool production_mode) const {
  std::vector<LineRecord> records;
  int64_t completed = 0;
  for (const RoundSummary& r : rounds) {
    completed += r.status == RoundStatus::kComplete;
  }
  LineRecord run("run");
  run.Add("status", status)
      .Add("stop_reason", stop_reason)
      .Add("rounds_completed", completed)
      .Add("round_attempts", static_cast<int64_t>(rounds.size()))
      .Add("final_version", final_model.version)
      .Add("sessions", sessions);
  records.push_back(std::move(run));
  for (LineRecord& r : analytics.ToRecords(production_mode)) {
    records.push_back(std::move(r));
  }
  records.push_back(metadata.ToRecord());
  for (size_t i = 0; i < rounds.size(); ++i) {
    records.push_back(rounds[i].ToRecord());
    if (i < round_policies.size()) {
      LineRecord r("keep_policy");
      r.Add("round", rounds[i].round_id)
          .Add("keep_pos", round_policies[i].keep_pos)
          .Add("keep_neg", round_policies[i].keep_neg);
      records.push_back(std::move(r));
    }
  }
  for (const EvalPoint& e : evals) {
    for (LineRecord& r : e.noised.ToRecords(e.version)) {
      records.push_back(std::move(r));
    }
    records.push_back(
        HistogramRecord("score_histogram", e.version, e.noised.histogram));
    if (!production_mode) {
      LineRecord exact("exact_metrics");
      exact.Add("round", e.version)
          .Add("auc", e.exact_auc)
          .Add("loss", e.exact_loss)
          .Add("accuracy", e.exact_accuracy);
      records.push_back(std::move(exact));
    }
  }
  if (!production_mode) {
    LineRecord submitted("exact_submissions");
    submitted.Add("positive", submitted_positive)
        .Add("negative", submitted_negative);
    records.push_back(std::move(submitted));
  }
  for (LineRecord& r : funnel.ToRecords()) records.push_back(std::move(r));

  std::string out = "# fedsim run report\n";
  for (const LineRecord& r : records) out += r.ToLine() + "\n";
  out += "# transform spec\n";
  out += spec.Serialize();
  return out;
}

std::string RunReport::FunnelEventsText() const {
  std::string out;
  for (const FunnelEvent& e : funnel_events) out += e.ToRecord().ToLine() + "\n";
  return out;
}

BaselineOptions BaselineOptionsFor(const ExperimentConfig& config) {
  BaselineOptions o;
  o.model = ResolvedModel(config);
  o.hyper.learning_rate = 0.1;
  o.hyper.batch_size = 16;
  o.hyper.clip_norm = config.train.clip_norm;
  o.epochs = 10;
  o.normalize = true;
  o.balance = true;
  o.seed = Rng(config.seed).Fork(kModelInit).NextU64();
  return o;
}

bool BalancingComparison::Passed() const {
  return entropy_on > entropy_off && central_on > central_off;
}

std::string BalancingComparison::ToText() const {
  std::string out = "label balancing comparison\n";
  out += fmt::format("keep policy: keep_pos={:.4f} keep_neg={:.4f}\n",
                     policy.keep_pos, policy.keep_neg);
  out += fmt::format("{:<12} {:>10} {:>10}\n", "bin", "off", "on");
  const double total_off = std::accumulate(off.begin(), off.end(), 0.0);
  const double total_on = std::accumulate(on.begin(), on.end(), 0.0);
  for (int b = 0; b < kHistogramBins; ++b) {
    out += fmt::format("[{:.2f},{:.2f}) {:>10.4f} {:>10.4f}\n",
                       b / 20.0, (b + 1) / 20.0,
                       total_off > 0 ? off[b] / total_off : 0.0,
                       total_on > 0 ? on[b] / total_on : 0.0);
  }
  out += fmt::format("entropy      {:>10.4f} {:>10.4f}\n", entropy_off,
                     entropy_on);
  out += fmt::format("central mass {:>10.4f} {:>10.4f}\n", central_off,
                     central_on);
  out += fmt::format("result: {}\n", Passed() ? "PASS" : "FAIL");
  return out;
}

absl::StatusOr<BalancingComparison> ExperimentBalancing(
    const ExperimentConfig& config) {
  ExperimentConfig off = config, on = config;
  off.balancing = false;
  on.balancing = true;
  absl::StatusOr<RunReport> a = RunSimulation(off);
  if (!a.ok()) return a.status();
  absl::StatusOr<RunReport> b = RunSimulation(on);
  if (!b.ok()) return b.status();
  BalancingComparison c;
  c.policy = b->metadata.policy;
  c.off = a->evals.back().noised.histogram;
  c.on = b->evals.back().noised.histogram;
  c.entropy_off = HistogramEntropy(c.off);
  c.entropy_on = HistogramEntropy(c.on);
  c.central_off = CentralMass(c.off);
  c.central_on = CentralMass(c.on);
  return c;
}

bool NormalizationComparison::Saturated() const {
  return early_improvement_off > 0 &&
         late_improvement_off < 0.1 * early_improvement_off;
}

bool NormalizationComparison::Passed() const {
  return loss_ratio <= 0.5 && accuracy_gain >= 0.02 && Saturated();
}

std::string NormalizationComparison::ToText() const {
  std::string out = "feature normalization comparison\n";
  out += "loss off:     " + CurveText(loss_off) + "\n";
  out += "loss on:      " + CurveText(loss_on) + "\n";
  out += "accuracy off: " + CurveText(accuracy_off) + "\n";
  out += "accuracy on:  " + CurveText(accuracy_on) + "\n";
  out += fmt::format("final loss ratio (on/off): {:.4f}\n", loss_ratio);
  out += fmt::format("final accuracy gain: {:+.4f}\n", accuracy_gain);
  out += fmt::format(
      "un-normalized improvement first third {:.4f}, last third {:.4f} ({})\n",
      early_improvement_off, late_improvement_off,
      Saturated() ? "saturated" : "not saturated");
  out += fmt::format("result: {}\n", Passed() ? "PASS" : "FAIL");
  return out;
}

absl::StatusOr<NormalizationComparison> ExperimentNormalization(
    const ExperimentConfig& config) {
  ExperimentConfig off = config, on = config;
  off.normalization = false;
  on.normalization = true;
  absl::StatusOr<RunReport> a = RunSimulation(off);
  if (!a.ok()) return a.status();
  absl::StatusOr<RunReport> b = RunSimulation(on);
  if (!b.ok()) return b.status();
  NormalizationComparison c;
  for (const EvalPoint& e : a->evals) {
    c.loss_off.push_back(e.noised.loss);
    c.accuracy_off.push_back(e.noised.accuracy);
  }
  for (const EvalPoint& e : b->evals) {
    c.loss_on.push_back(e.noised.loss);
    c.accuracy_on.push_back(e.noised.accuracy);
  }
  c.loss_ratio = c.loss_off.back() > 0 ? c.loss_on.back() / c.loss_off.back()
                                       : INFINITY;
  c.accuracy_gain = c.accuracy_on.back() - c.accuracy_off.back();
  const size_t n = c.loss_off.size() - 1;
  const size_t third = std::max<size_t>(1, n / 3);
  if (n >= 2) {
    c.early_improvement_off = c.loss_off[0] - c.loss_off[third];
    c.late_improvement_off = c.loss_off[n - third] - c.loss_off[n];
  }
  return c;
}

bool DegradationComparison::Passed(double tolerance) const {
  return federated_auc >= baseline_auc - tolerance;
}

std::string DegradationComparison::ToText() const {
  return fmt::format(
      "federated auc {:.4f}, central baseline auc {:.4f}, gap {:+.4f}\n",
      federated_auc, baseline_auc, federated_auc - baseline_auc);
}

absl::StatusOr<DegradationComparison> CompareWithBaseline(
    const ExperimentConfig& config) {
  absl::StatusOr<RunReport> run = RunSimulation(config);
  if (!run.ok()) return run.status();
  absl::StatusOr<Fleets> fleets = MakeFleets(config);
  if (!fleets.ok()) return fleets.status();
  absl::StatusOr<BaselineMetrics> baseline = CentralBaseline(
      fleets->train, fleets->eval, BaselineOptionsFor(config));
  if (!baseline.ok()) return baseline.status();
  DegradationComparison c;
  c.federated_auc = run->evals.back().exact_auc;
  c.baseline_auc = baseline->auc;
  return c;
}

double SubmissionBalance::PositiveShare() const {
  const int64_t total = positives + negatives;
  return total > 0 ? static_cast<double>(positives) / total : 0.0;
}

absl::StatusOr<SubmissionBalance> MeasureSubmissionBalance(
    const ExperimentConfig& config) {
  absl::StatusOr<Fleets> fleets = MakeFleets(config);
  if (!fleets.ok()) return fleets.status();
  absl::StatusOr<AnalyticsSummary> analytics = RunAnalytics(config, *fleets);
  if (!analytics.ok()) return analytics.status();
  if (!analytics->labels) {
    return absl::FailedPreconditionError("single-class label statistics");
  }
  const FeatureSchema& schema = fleets->train.schema;
  absl::StatusOr<CompiledTransform> transform = CompiledTransform::Load(
      MakeStandardSpec(schema, &analytics->features, 1), schema);
  if (!transform.ok()) return transform.status();
  const Rng root(config.seed);
  const ModelWeights snapshot =
      InitWeights(ResolvedModel(config), root.Fork(kModelInit).NextU64());

  SubmissionBalance result;
  result.policy = analytics->labels->policy;
  SessionContext context;
  context.snapshot = &snapshot;
  context.transform = &*transform;
  context.hyper = config.train;
  context.policy = result.policy;
  context.criteria.min_battery = 0;
  context.criteria.required_network = NetworkClass::kMetered;
  context.criteria.require_idle = false;
  context.criteria.min_storage_bytes = 0;
  context.criteria.min_app_version = 0;
  Rng rng = root.Fork(kSubmissionProbe);
  for (DeviceState& device : fleets->train.devices) {
    device.network = NetworkClass::kUnmetered;
    const SessionOutcome outcome = RunTrainingSession(device, context, {}, rng);
    ++result.sessions;
    result.positives += outcome.submitted_positive;
    result.negatives += outcome.submitted_negative;
  }
  return result;
}

}  // namespace fedsim
