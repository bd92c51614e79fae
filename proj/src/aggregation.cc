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

#include "fedsim/aggregation.h"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace fedsim {
namespace {

bool AllFinite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string_view StatusName(RoundStatus status) {
  switch (status) {
    case RoundStatus::kOpen:
      return "open";
    case RoundStatus::kComplete:
      return "complete";
    case RoundStatus::kAbandoned:
      return "abandoned";
  }
  return "open";
}

}  // namespace

std::string_view PlacementName(NoisePlacement placement) {
  return placement == NoisePlacement::kTee ? "tee" : "device";
}

std::optional<NoisePlacement> ParsePlacement(std::string_view name) {
  if (name == "device") return NoisePlacement::kDevice;
  if (name == "tee") return NoisePlacement::kTee;
  return std::nullopt;
}

std::string_view OutcomeName(SubmitOutcome outcome) {
  switch (outcome) {
    case SubmitOutcome::kAccepted:
      return "accepted";
    case SubmitOutcome::kRejectedStale:
      return "stale";
    case SubmitOutcome::kRejectedCorrupt:
      return "corrupt";
    case SubmitOutcome::kRejectedClosed:
      return "closed";
  }
  return "closed";
}

std::string_view StopReasonName(StopReason reason) {
  switch (reason) {
    case StopReason::kContinue:
      return "continue";
    case StopReason::kMaxRounds:
      return "max_rounds";
    case StopReason::kMetric:
      return "metric";
  }
  return "continue";
}

absl::Status AggregationConfig::Validate() const {
  if (target_updates < 1) {
    return absl::InvalidArgumentError("target_updates must be >= 1");
  }
  if (max_wait < 1) return absl::InvalidArgumentError("max_wait must be >= 1");
  if (!(tee_noise_std >= 0) || !std::isfinite(tee_noise_std)) {
    return absl::InvalidArgumentError("tee_noise_std must be non-negative");
  }
  if (!(server_lr > 0) || !std::isfinite(server_lr)) {
    return absl::InvalidArgumentError("server_lr must be positive");
  }
  if (max_rounds < 1) {
    return absl::InvalidArgumentError("max_rounds must be >= 1");
  }
  if (stop_metric_threshold && !std::isfinite(*stop_metric_threshold)) {
    return absl::InvalidArgumentError("stop threshold must be finite");
  }
  return absl::OkStatus();
}

RoundState::RoundState(int64_t round_id, int64_t snapshot_version,
                       int target_updates, int64_t max_wait)
    : round_id_(round_id),
      snapshot_version_(snapshot_version),
      target_updates_(target_updates),
      max_wait_(max_wait) {}

SubmitOutcome RoundState::Submit(GradientUpdate update) {
  std::lock_guard lock(mu_);
  SubmitOutcome outcome = SubmitOutcome::kAccepted;
  if (status_ != RoundStatus::kOpen) {
    outcome = SubmitOutcome::kRejectedClosed;
  } else if (update.base_version != snapshot_version_) {
    outcome = SubmitOutcome::kRejectedStale;
  } else if (!AllFinite(update.delta) || update.sample_weight < 1) {
    outcome = SubmitOutcome::kRejectedCorrupt;
  }
  if (outcome != SubmitOutcome::kAccepted) {
    ++rejected_;
    return outcome;
  }
  updates_.push_back(std::move(update));
  if (static_cast<int>(updates_.size()) == target_updates_) {
    status_ = RoundStatus::kComplete;
  }
  return outcome;
}

void RoundState::Advance(int64_t time_units) {
  std::lock_guard lock(mu_);
  elapsed_ += time_units;
  if (status_ == RoundStatus::kOpen && elapsed_ > max_wait_) {
    status_ = RoundStatus::kAbandoned;
    updates_.clear();
  }
}

void RoundState::Abandon() {
  std::lock_guard lock(mu_);
  status_ = RoundStatus::kAbandoned;
  updates_.clear();
}

RoundStatus RoundState::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

int64_t RoundState::elapsed() const {
  std::lock_guard lock(mu_);
  return elapsed_;
}

std::vector<GradientUpdate> RoundState::accepted() const {
  std::lock_guard lock(mu_);
  return updates_;
}

int64_t RoundState::rejected_count() const {
  std::lock_guard lock(mu_);
  return rejected_;
}

LineRecord RoundSummary::ToRecord() const {
  LineRecord r("round");
  r.Add("round", round_id)
      .Add("version", version)
      .Add("status", StatusName(status))
      .Add("participants", participants)
      .Add("samples", samples)
      .Add("rejected", rejected)
      .Add("delta_norm", delta_norm);
  return r;
}

int64_t GlobalModel::completed_rounds() const {
  return std::count_if(history.begin(), history.end(), [](const auto& r) {
    return r.status == RoundStatus::kComplete;
  });
}

absl::StatusOr<std::vector<double>> WeightedAverage(
    std::span<const GradientUpdate> updates) {
  if (updates.empty()) {
    return absl::InvalidArgumentError("no updates to average");
  }
  const size_t n = updates.front().delta.size();
  std::vector<const GradientUpdate*> order;
  for (const GradientUpdate& u : updates) {
    if (u.delta.size() != n) {
      return absl::InvalidArgumentError("updates differ in length");
    }
    order.push_back(&u);
  }
  std::sort(order.begin(), order.end(),
            [](const GradientUpdate* a, const GradientUpdate* b) {
              if (a->sample_weight != b->sample_weight) {
                return a->sample_weight < b->sample_weight;
              }
              return a->delta < b->delta;
            });
  std::vector<double> sum(n, 0.0);
  double total = 0;
  for (const GradientUpdate* u : order) {
    const double w = static_cast<double>(u->sample_weight);
    total += w;
    for (size_t i = 0; i < n; ++i) sum[i] += w * u->delta[i];
  }
  for (double& v : sum) v /= total;
  return sum;
}

AggregationServer::AggregationServer(ModelWeights initial,
                                     AggregationConfig config)
    : config_(std::move(config)) {
  model_.weights = std::move(initial);
}

absl::StatusOr<std::shared_ptr<RoundState>> AggregationServer::OpenRound() {
  if (current_ && current_->status() == RoundStatus::kOpen) {
    return absl::FailedPreconditionError("a round is already open");
  }
  if (current_ && current_->status() == RoundStatus::kComplete) {
    return absl::FailedPreconditionError(
        "the completed round has not been aggregated");
  }
  current_ = std::make_shared<RoundState>(next_round_id_++, model_.version(),
                                          config_.target_updates,
                                          config_.max_wait);
  return current_;
}

absl::Status AggregationServer::Aggregate(Rng& rng) {
  if (!current_ || current_->status() != RoundStatus::kComplete) {
    return absl::FailedPreconditionError("round is not complete");
  }
  const std::vector<GradientUpdate> updates = current_->accepted();
  absl::StatusOr<std::vector<double>> delta = WeightedAverage(updates);
  if (!delta.ok()) return delta.status();
  if (config_.noise_placement == NoisePlacement::kTee &&
      config_.tee_noise_std > 0) {
    for (double& d : *delta) d += rng.Gaussian(0.0, config_.tee_noise_std);
  }
  std::vector<double>& params = model_.weights.params;
  if (delta->size() != params.size()) {
    return absl::InvalidArgumentError("update does not match the model");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    params[i] += config_.server_lr * (*delta)[i];
  }
  ++model_.weights.version;

  RoundSummary summary;
  summary.round_id = current_->round_id();
  summary.version = model_.weights.version;
  summary.status = RoundStatus::kComplete;
  summary.participants = static_cast<int64_t>(updates.size());
  for (const GradientUpdate& u : updates) summary.samples += u.sample_weight;
  summary.rejected = current_->rejected_count();
  summary.delta_norm = L2Norm(*delta);
  model_.history.push_back(summary);
  current_.reset();
  return absl::OkStatus();
}

absl::Status AggregationServer::AbandonRound() {
  if (!current_) return absl::FailedPreconditionError("no current round");
  current_->Abandon();
  RoundSummary summary;
  summary.round_id = current_->round_id();
  summary.version = model_.weights.version;
  summary.status = RoundStatus::kAbandoned;
  summary.rejected = current_->rejected_count();
  model_.history.push_back(summary);
  current_.reset();
  return absl::OkStatus();
}

void AggregationServer::RecordEvalAccuracy(double accuracy) {
  for (auto it = model_.history.rbegin(); it != model_.history.rend(); ++it) {
    if (it->status == RoundStatus::kComplete) {
      it->eval_accuracy = accuracy;
      return;
    }
  }
}

StopReason ShouldStop(std::span<const RoundSummary> history,
                      const AggregationConfig& config) {
  int64_t completed = 0;
  const RoundSummary* latest = nullptr;
  for (const RoundSummary& r : history) {
    if (r.status != RoundStatus::kComplete) continue;
    ++completed;
    latest = &r;
  }
  if (completed >= config.max_rounds) return StopReason::kMaxRounds;
  if (latest != nullptr && config.stop_metric_threshold &&
      latest->eval_accuracy &&
      *latest->eval_accuracy >= *config.stop_metric_threshold) {
    return StopReason::kMetric;
  }
  return StopReason::kContinue;
}

}  // namespace fedsim
