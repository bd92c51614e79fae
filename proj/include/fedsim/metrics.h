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

// Evaluation metrics computed from thresholded confusion counts.
//
// Devices in an evaluation cohort score their local samples against a fixed
// threshold grid and report only counts. The server sums the counts, adds
// Gaussian noise, and derives precision, recall and a trapezoidal ROC AUC.

#ifndef FEDSIM_METRICS_H_
#define FEDSIM_METRICS_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/record.h"
#include "fedsim/rng.h"

namespace fedsim {

inline constexpr int kHistogramBins = 20;
using ScoreHistogram = std::array<double, kHistogramBins>;

// `points` evenly spaced thresholds over [0, 1], both ends included.
std::vector<double> ThresholdGrid(int points);

struct ConfusionCounts {
  double tp = 0, fp = 0, tn = 0, fn = 0;
};

// A sample is predicted positive at threshold t when score >= t.
struct EvalReport {
  std::vector<double> thresholds;
  std::vector<ConfusionCounts> counts;  // one per threshold
  double sample_count = 0;
  double loss_sum = 0;
  ScoreHistogram histogram{};
};

absl::StatusOr<EvalReport> MakeEvalReport(std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const double> thresholds);

struct ThresholdMetrics {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  double false_positive_rate = 0;
};

struct NoisedMetrics {
  std::vector<ThresholdMetrics> per_threshold;
  double auc = 0;
  double loss = 0;      // mean binary cross-entropy
  double accuracy = 0;  // at the grid threshold closest to 0.5
  double sample_count = 0;
  double noise_std = 0;
  ScoreHistogram histogram{};

  // "metrics round auc loss accuracy samples noise" followed by one
  // "metric_threshold round threshold precision recall fpr" per threshold.
  std::vector<LineRecord> ToRecords(int64_t round) const;
};

// Sums reports, adds N(0, noise_std^2) to every aggregated count, clamps at
// zero, then derives metrics. Fails on empty input or mismatched grids.
absl::StatusOr<NoisedMetrics> AggregateEval(std::span<const EvalReport> reports,
                                            double noise_std, Rng& rng);

// Trapezoidal area under the (FPR, TPR) points of the given counts, with the
// (0,0) and (1,1) corners added, clamped to [0, 1].
double AucFromCounts(std::span<const ConfusionCounts> counts);

// Rank-based ROC AUC; tied scores count one half.
double ExactAuc(std::span<const double> scores, std::span<const int> labels);

ScoreHistogram MakeHistogram(std::span<const double> scores);
// Shannon entropy in nats of the normalized histogram.
double HistogramEntropy(const ScoreHistogram& histogram);
// Fraction of mass in bins covering [0.2, 0.8).
double CentralMass(const ScoreHistogram& histogram);

}  // namespace fedsim

#endif  // FEDSIM_METRICS_H_
