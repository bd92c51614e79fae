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

#include "fedsim/config.h"

#include <algorithm>
#include <optional>
#include <vector>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace fedsim {
namespace {

using nlohmann::json;

// Reads known keys from one JSON object and reports any left over.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path)
      : object_(object), path_(std::move(path)) {}

  template <typename T>
  void Read(const char* key, T& out) {
    seen_.push_back(key);
    if (!status_.ok() || !object_.contains(key)) return;
    try {
      out = object_.at(key).get<T>();
    } catch (const json::exception& e) {
      status_ = absl::InvalidArgumentError(
          fmt::format("{}.{}: {}", path_, key, e.what()));
    }
  }

  const json* Child(const char* key) {
    seen_.push_back(key);
    if (!object_.contains(key)) return nullptr;
    if (!object_.at(key).is_object()) {
      status_ = absl::InvalidArgumentError(
          fmt::format("{}.{} must be an object", path_, key));
      return nullptr;
    }
    return &object_.at(key);
  }

  absl::Status Finish() const {
    if (!status_.ok()) return status_;
    for (const auto& [key, value] : object_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        return absl::InvalidArgumentError(
            fmt::format("unknown config key {}.{}", path_, key));
      }
    }
    return absl::OkStatus();
  }

  void Mark(const char* key) { seen_.push_back(key); }

  void Fail(absl::Status status) {
    if (status_.ok()) status_ = std::move(status);
  }

 private:
  const json& object_;
  std::string path_;
  std::vector<std::string> seen_;
  absl::Status status_;
};

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  if (absl::Status s = population.Validate(); !s.ok()) return s;
  if (absl::Status s = train.Validate(); !s.ok()) return s;
  if (absl::Status s = aggregation.Validate(); !s.ok()) return s;
  if (absl::Status s = eligibility.Validate(); !s.ok()) return s;
  ModelConfig m = model;
  if (m.input_dim == 0) {
    m.input_dim = static_cast<int>(population.true_weights.size());
  }
  if (m.input_dim != static_cast<int>(population.true_weights.size())) {
    return absl::InvalidArgumentError(
        "model.input_dim must equal the number of features");
  }
  if (absl::Status s = m.Validate(); !s.ok()) return s;
  if (eval_devices < 1 || analytics.devices < 1) {
    return absl::InvalidArgumentError(
        "eval and analytics fleets must be non-empty");
  }
  if (!(analytics.flip_prob >= 0 && analytics.flip_prob < 0.5)) {
    return absl::InvalidArgumentError("analytics.flip_prob must be in [0, 0.5)");
  }
  if (!(analytics.balance_target > 0 && analytics.balance_target <= 0.5)) {
    return absl::InvalidArgumentError(
        "analytics.balance_target must be in (0, 0.5]");
  }
  if (analytics.quantile_iterations < 1 || analytics.quantile_cohort < 1) {
    return absl::InvalidArgumentError("quantile settings must be positive");
  }
  for (double rate : {faults.battery_drop_rate, faults.network_loss_rate}) {
    if (!(rate >= 0 && rate <= 1)) {
      return absl::InvalidArgumentError("fault rates must be in [0, 1]");
    }
  }
  if (!(metric_noise_std >= 0)) {
    return absl::InvalidArgumentError("metric_noise_std must be >= 0");
  }
  if (threshold_points < 2) {
    return absl::InvalidArgumentError("threshold_points must be >= 2");
  }
  if (warmup_ticks < 0 || max_consecutive_abandoned < 1) {
    return absl::InvalidArgumentError(
        "warmup_ticks must be >= 0 and max_consecutive_abandoned >= 1");
  }
  if (aggregation.noise_placement == NoisePlacement::kDevice &&
      aggregation.tee_noise_std > 0) {
    return absl::InvalidArgumentError(
        "tee_noise_std is set but noise placement is device");
  }
  if (aggregation.noise_placement == NoisePlacement::kTee &&
      train.noise_multiplier > 0) {
    return absl::InvalidArgumentError(
        "noise_multiplier is set but noise placement is tee");
  }
  return absl::OkStatus();
}

std::string ExperimentConfig::ToJson() const {
  json j;
  j["seed"] = seed;
  j["population"] = {
      {"device_count", population.device_count},
      {"samples_per_device", population.samples_per_device},
      {"positive_rate", population.positive_rate},
      {"scale_disparity", population.scale_disparity},
      {"device_signal_noise", population.device_signal_noise},
      {"server_signal_noise", population.server_signal_noise},
      {"true_weights", population.true_weights},
      {"true_bias", population.true_bias}};
  j["eval_devices"] = eval_devices;
  j["model"] = {{"input_dim", model.input_dim},
                {"hidden_widths", model.hidden_widths}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"clip_norm", train.clip_norm},
                {"noise_multiplier", train.noise_multiplier},
                {"local_steps", train.local_steps},
                {"batch_size", train.batch_size}};
  j["aggregation"] = {
      {"target_updates", aggregation.target_updates},
      {"max_wait", aggregation.max_wait},
      {"noise_placement", PlacementName(aggregation.noise_placement)},
      {"tee_noise_std", aggregation.tee_noise_std},
      {"server_lr", aggregation.server_lr},
      {"max_rounds", aggregation.max_rounds},
      {"stop_metric_threshold",
       aggregation.stop_metric_threshold
           ? json(*aggregation.stop_metric_threshold)
           : json(nullptr)}};
  j["analytics"] = {{"devices", analytics.devices},
                    {"flip_prob", analytics.flip_prob},
                    {"balance_target", analytics.balance_target},
                    {"quantile_iterations", analytics.quantile_iterations},
                    {"quantile_cohort", analytics.quantile_cohort}};
  j["eligibility"] = {
      {"min_battery", eligibility.min_battery},
      {"required_network", NetworkName(eligibility.required_network)},
      {"require_idle", eligibility.require_idle},
      {"min_storage_bytes", eligibility.min_storage_bytes},
      {"min_app_version", eligibility.min_app_version}};
  j["faults"] = {{"battery_drop_rate", faults.battery_drop_rate},
                 {"network_loss_rate", faults.network_loss_rate}};
  j["balancing"] = balancing;
  j["normalization"] = normalization;
  j["metric_noise_std"] = metric_noise_std;
  j["threshold_points"] = threshold_points;
  j["warmup_ticks"] = warmup_ticks;
  j["max_consecutive_abandoned"] = max_consecutive_abandoned;
  j["output_dir"] = output_dir;
  return j.dump(2) + "\n";
}

absl::StatusOr<ExperimentConfig> ExperimentConfig::FromJson(
    std::string_view text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("config is not a JSON object");
  }
  ExperimentConfig c;
  ObjectReader top(j, "config");
  top.Read("seed", c.seed);
  top.Read("eval_devices", c.eval_devices);
  top.Read("balancing", c.balancing);
  top.Read("normalization", c.normalization);
  top.Read("metric_noise_std", c.metric_noise_std);
  top.Read("threshold_points", c.threshold_points);
  top.Read("warmup_ticks", c.warmup_ticks);
  top.Read("max_consecutive_abandoned", c.max_consecutive_abandoned);
  top.Read("output_dir", c.output_dir);

  std::vector<absl::Status> nested;
  if (const json* p = top.Child("population")) {
    ObjectReader r(*p, "population");
    r.Read("device_count", c.population.device_count);
    r.Read("samples_per_device", c.population.samples_per_device);
    r.Read("positive_rate", c.population.positive_rate);
    r.Read("scale_disparity", c.population.scale_disparity);
    r.Read("device_signal_noise", c.population.device_signal_noise);
    r.Read("server_signal_noise", c.population.server_signal_noise);
    r.Read("true_weights", c.population.true_weights);
    r.Read("true_bias", c.population.true_bias);
    nested.push_back(r.Finish());
  }
  if (const json* p = top.Child("model")) {
    ObjectReader r(*p, "model");
    r.Read("input_dim", c.model.input_dim);
    r.Read("hidden_widths", c.model.hidden_widths);
    nested.push_back(r.Finish());
  }
  if (const json* p = top.Child("train")) {
    ObjectReader r(*p, "train");
    r.Read("learning_rate", c.train.learning_rate);
    r.Read("clip_norm", c.train.clip_norm);
    r.Read("noise_multiplier", c.train.noise_multiplier);
    r.Read("local_steps", c.train.local_steps);
    r.Read("batch_size", c.train.batch_size);
    nested.push_back(r.Finish());
  }
  if (const json* p = top.Child("aggregation")) {
    ObjectReader r(*p, "aggregation");
    AggregationConfig& a = c.aggregation;
    r.Read("target_updates", a.target_updates);
    r.Read("max_wait", a.max_wait);
    std::string placement = std::string(PlacementName(a.noise_placement));
    r.Read("noise_placement", placement);
    if (std::optional<NoisePlacement> np = ParsePlacement(placement)) {
      a.noise_placement = *np;
    } else {
      r.Fail(absl::InvalidArgumentError(
          "aggregation.noise_placement must be device or tee"));
    }
    r.Read("tee_noise_std", a.tee_noise_std);
    r.Read("server_lr", a.server_lr);
    r.Read("max_rounds", a.max_rounds);
    r.Mark("stop_metric_threshold");
    if (p->contains("stop_metric_threshold")) {
      const json& t = p->at("stop_metric_threshold");
      if (t.is_number()) {
        a.stop_metric_threshold = t.get<double>();
      } else if (!t.is_null()) {
        r.Fail(absl::InvalidArgumentError(
            "aggregation.stop_metric_threshold must be a number or null"));
      }
    }
    nested.push_back(r.Finish());
  }
  if (const json* p = top.Child("analytics")) {
    ObjectReader r(*p, "analytics");
    r.Read("devices", c.analytics.devices);
    r.Read("flip_prob", c.analytics.flip_prob);
    r.Read("balance_target", c.analytics.balance_target);
    r.Read("quantile_iterations", c.analytics.quantile_iterations);
    r.Read("quantile_cohort", c.analytics.quantile_cohort);
    nested.push_back(r.Finish());
  }
  if (const json* p = top.Child("eligibility")) {
    ObjectReader r(*p, "eligibility");
    r.Read("min_battery", c.eligibility.min_battery);
    std::string network =
        std::string(NetworkName(c.eligibility.required_network));
    r.Read("required_network", network);
    if (std::optional<NetworkClass> n = ParseNetwork(network)) {
      c.eligibility.required_network = *n;
    } else {
      r.Fail(absl::InvalidArgumentError(
          "eligibility.required_network must be offline, metered or "
          "unmetered"));
    }
    r.Read("require_idle", c.eligibility.require_idle);
    r.Read("min_storage_bytes", c.eligibility.min_storage_bytes);
    r.Read("min_app_version", c.eligibility.min_app_version);
    nested.push_back(r.Finish());
  }
  if (const json* p = top.Child("faults")) {
    ObjectReader r(*p, "faults");
    r.Read("battery_drop_rate", c.faults.battery_drop_rate);
    r.Read("network_loss_rate", c.faults.network_loss_rate);
    nested.push_back(r.Finish());
  }
  if (absl::Status s = top.Finish(); !s.ok()) return s;
  for (const absl::Status& s : nested) {
    if (!s.ok()) return s;
  }
  c.population.seed = c.seed;
  if (absl::Status s = c.Validate(); !s.ok()) return s;
  return c;
}

}  // namespace fedsim
