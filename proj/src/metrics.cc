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

#include "fedsim/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/model.h"

namespace fedsim {
namespace {

int HistogramBin(double score) {
  int bin = static_cast<int>(score * kHistogramBins);
  return std::clamp(bin, 0, kHistogramBins - 1);
}

double SafeRatio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

std::vector<double> ThresholdGrid(int points) {
  std::vector<double> grid;
  if (points < 2) return {0.5};
  for (int i = 0; i < points; ++i) {
    grid.push_back(static_cast<double>(i) / (points - 1));
  }
  return grid;
}

absl::StatusOr<EvalReport> MakeEvalReport(std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const double> thresholds) {
  if (scores.size() != labels.size()) {
    return absl::InvalidArgumentError("scores and labels differ in length");
  }
  if (thresholds.empty()) {
    return absl::InvalidArgumentError("threshold grid is empty");
  }
  EvalReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  report.counts.resize(thresholds.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool positive = labels[i] == 1;
    for (size_t t = 0; t < thresholds.size(); ++t) {
      ConfusionCounts& c = report.counts[t];
      const bool predicted = scores[i] >= thresholds[t];
      if (positive) {
        (predicted ? c.tp : c.fn) += 1;
      } else {
        (predicted ? c.fp : c.tn) += 1;
      }
    }
    report.loss_sum += BinaryCrossEntropy(scores[i], labels[i]);
    report.histogram[HistogramBin(scores[i])] += 1;
  }
  report.sample_count = static_cast<double>(scores.size());
  return report;
}

double AucFromCounts(std::span<const ConfusionCounts> counts) {
  std::vector<std::pair<double, double>> points = {{0.0, 0.0}, {1.0, 1.0}};
  for (const ConfusionCounts& c : counts) {
    points.emplace_back(SafeRatio(c.fp, c.fp + c.tn),
                        SafeRatio(c.tp, c.tp + c.fn));
  }
  std::sort(points.begin(), points.end());
  double area = 0;
  for (size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) *
            (points[i].second + points[i - 1].second) / 2;
  }
  return std::clamp(area, 0.0, 1.0);
}

absl::StatusOr<NoisedMetrics> AggregateEval(std::span<const EvalReport> reports,
                                            double noise_std, Rng& rng) {
  if (reports.empty()) {
    return absl::InvalidArgumentError("no evaluation reports");
  }
  if (!(noise_std >= 0)) {
    return absl::InvalidArgumentError("noise_std must be non-negative");
  }
  const std::vector<double>& grid = reports.front().thresholds;
  std::vector<ConfusionCounts> sum(grid.size());
  double samples = 0, loss_sum = 0;
  ScoreHistogram histogram{};
  for (const EvalReport& r : reports) {
    if (r.thresholds != grid || r.counts.size() != grid.size()) {
      return absl::InvalidArgumentError("evaluation reports use different grids");
    }
    for (size_t t = 0; t < grid.size(); ++t) {
      sum[t].tp += r.counts[t].tp;
      sum[t].fp += r.counts[t].fp;
      sum[t].tn += r.counts[t].tn;
      sum[t].fn += r.counts[t].fn;
    }
    samples += r.sample_count;
    loss_sum += r.loss_sum;
    for (int b = 0; b < kHistogramBins; ++b) histogram[b] += r.histogram[b];
  }
  auto noised = [&](double v) {
    if (noise_std > 0) v += rng.Gaussian(0.0, noise_std);
    return std::max(0.0, v);
  };
  for (ConfusionCounts& c : sum) {
    c.tp = noised(c.tp);
    c.fp = noised(c.fp);
    c.tn = noised(c.tn);
    c.fn = noised(c.fn);
  }
  samples = noised(samples);
  loss_sum = noised(loss_sum);
  for (double& h : histogram) h = noised(h);

  NoisedMetrics out;
  out.noise_std = noise_std;
  out.sample_count = samples;
  out.loss = SafeRatio(loss_sum, samples);
  out.histogram = histogram;
  size_t mid = 0;
  for (size_t t = 0; t < grid.size(); ++t) {
    const ConfusionCounts& c = sum[t];
    out.per_threshold.push_back({grid[t], SafeRatio(c.tp, c.tp + c.fp),
                                 SafeRatio(c.tp, c.tp + c.fn),
                                 SafeRatio(c.fp, c.fp + c.tn)});
    if (std::abs(grid[t] - 0.5) < std::abs(grid[mid] - 0.5)) mid = t;
  }
  const ConfusionCounts& m = sum[mid];
  out.accuracy = SafeRatio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn);
  out.auc = AucFromCounts(sum);
  return out;
}

std::vector<LineRecord> NoisedMetrics::ToRecords(int64_t round) const {
  std::vector<LineRecord> out;
  LineRecord head("metrics");
  head.Add("round", round)
      .Add("auc", auc)
      .Add("loss", loss)
      .Add("accuracy", accuracy)
      .Add("samples", sample_count)
      .Add("noise", noise_std);
  out.push_back(std::move(head));
  for (const ThresholdMetrics& t : per_threshold) {
    LineRecord r("metric_threshold");
    r.Add("round", round)
        .Add("threshold", t.threshold)
        .Add("precision", t.precision)
        .Add("recall", t.recall)
        .Add("fpr", t.false_positive_rate);
    out.push_back(std::move(r));
  }
  return out;
}

double ExactAuc(std::span<const double> scores, std::span<const int> labels) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives (Mann-Whitney U).
  double rank_sum = 0, positives = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + j) + 1) / 2;
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        positives += 1;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0 || negatives == 0) return 0.5;
  return (rank_sum - positives * (positives + 1) / 2) / (positives * negatives);
}

ScoreHistogram MakeHistogram(std::span<const double> scores) {
  ScoreHistogram h{};
  for (double s : scores) h[HistogramBin(s)] += 1;
  return h;
}

double HistogramEntropy(const ScoreHistogram& histogram) {
  const double total = std::accumulate(histogram.begin(), histogram.end(), 0.0);
  if (total <= 0) return 0;
  double entropy = 0;
  for (double h : histogram) {
    if (h > 0) entropy -= (h / total) * std::log(h / total);
  }
  return entropy;
}

double CentralMass(const ScoreHistogram& histogram) {
  const double total = std::accumulate(histogram.begin(), histogram.end(), 0.0);
  if (total <= 0) return 0;
  double central = 0;
  for (int b = HistogramBin(0.2); b < HistogramBin(0.8); ++b) {
    central += histogram[b];
  }
  return central / total;
}

}  // namespace fedsim
