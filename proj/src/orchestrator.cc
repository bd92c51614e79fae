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

#include "fedsim/orchestrator.h"

#include <cmath>

#include <fmt/core.h>

namespace fedsim {
namespace {

class SessionLogger {
 public:
  SessionLogger(const SessionContext& context, Rng& rng) : context_(context) {
    if (context_.sink != nullptr) session_ = context_.sink->NewSession(rng);
  }

  void Success(int phase) {
    Log(phase, StepStatus::kSuccess, FailureReason::kNone);
  }
  void Failure(int phase, FailureReason reason) {
    Log(phase, StepStatus::kFailure, reason);
  }

 private:
  void Log(int phase, StepStatus status, FailureReason reason) {
    if (context_.sink == nullptr) return;
    // Failures here would be programming errors in the fixed pipeline.
    context_.sink
        ->Log({session_, context_.use_case, phase, 1, status, reason,
               context_.time_bucket})
        .IgnoreError();
  }

  const SessionContext& context_;
  SessionId session_;
};

}  // namespace

absl::Status EligibilityCriteria::Validate() const {
  if (!std::isfinite(min_battery)) {
    return absl::InvalidArgumentError("min_battery must be finite");
  }
  return absl::OkStatus();
}

EligibilityResult CheckEligibility(const DeviceState& device,
                                   const EligibilityCriteria& criteria) {
  if (device.battery < criteria.min_battery) {
    return {false, FailureReason::kBattery};
  }
  if (device.network == NetworkClass::kOffline ||
      static_cast<int>(device.network) <
          static_cast<int>(criteria.required_network)) {
    return {false, FailureReason::kNetwork};
  }
  if (criteria.require_idle && !device.idle) {
    return {false, FailureReason::kNotIdle};
  }
  if (device.free_storage_bytes < criteria.min_storage_bytes) {
    return {false, FailureReason::kStorage};
  }
  if (device.app_version < criteria.min_app_version) {
    return {false, FailureReason::kAppVersion};
  }
  return {};
}

bool DecideSubmission(int label, const KeepPolicy& policy, Rng& rng) {
  const double p = label == 1 ? policy.keep_pos : policy.keep_neg;
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return rng.Bernoulli(p);
}

LineRecord MetadataRecord::ToRecord() const {
  LineRecord r("metadata");
  r.Add("purpose", purpose)
      .Add("model_version", model_version)
      .Add("spec_version", spec_version)
      .Add("keep_pos", policy.keep_pos)
      .Add("keep_neg", policy.keep_neg)
      .Add("min_battery", criteria.min_battery)
      .Add("network", NetworkName(criteria.required_network))
      .Add("require_idle", criteria.require_idle)
      .Add("min_storage", criteria.min_storage_bytes)
      .Add("min_app_version", criteria.min_app_version);
  return r;
}

absl::StatusOr<MetadataRecord> MetadataRecord::FromRecord(
    const LineRecord& record) {
  if (record.tag() != "metadata") {
    return absl::InvalidArgumentError("not a metadata record");
  }
  MetadataRecord m;
  absl::StatusOr<std::string> purpose = record.Get("purpose");
  absl::StatusOr<int64_t> model_version = record.GetInt("model_version");
  absl::StatusOr<int64_t> spec_version = record.GetInt("spec_version");
  absl::StatusOr<double> keep_pos = record.GetDouble("keep_pos");
  absl::StatusOr<double> keep_neg = record.GetDouble("keep_neg");
  absl::StatusOr<double> battery = record.GetDouble("min_battery");
  absl::StatusOr<std::string> network = record.Get("network");
  absl::StatusOr<int64_t> idle = record.GetInt("require_idle");
  absl::StatusOr<int64_t> storage = record.GetInt("min_storage");
  absl::StatusOr<int64_t> app = record.GetInt("min_app_version");
  if (!purpose.ok() || !model_version.ok() || !spec_version.ok() ||
      !keep_pos.ok() || !keep_neg.ok() || !battery.ok() || !network.ok() ||
      !idle.ok() || !storage.ok() || !app.ok() || !ParseNetwork(*network)) {
    return absl::InvalidArgumentError("malformed metadata record");
  }
  m.purpose = *purpose;
  m.model_version = *model_version;
  m.spec_version = *spec_version;
  m.policy = {*keep_pos, *keep_neg};
  m.criteria.min_battery = *battery;
  m.criteria.required_network = *ParseNetwork(*network);
  m.criteria.require_idle = *idle != 0;
  m.criteria.min_storage_bytes = *storage;
  m.criteria.min_app_version = static_cast<int>(*app);
  if (absl::Status s = m.policy.Validate(); !s.ok()) return s;
  return m;
}

SessionOutcome RunTrainingSession(const DeviceState& device,
                                  const SessionContext& context,
                                  const SessionFaults& faults, Rng& rng) {
  SessionOutcome out;
  SessionLogger log(context, rng);
  auto fail = [&](int phase, FailureReason reason) {
    log.Failure(phase, reason);
    out.failed_phase = phase;
    out.reason = reason;
    out.update.reset();
    return out;
  };

  const EligibilityResult eligibility =
      CheckEligibility(device, context.criteria);
  if (!eligibility.eligible) return fail(kPhaseEligibility, eligibility.reason);
  log.Success(kPhaseEligibility);

  if (device.signal_ticks < context.warmup_ticks) {
    return fail(kPhaseDataReady, FailureReason::kWarmup);
  }
  absl::StatusOr<std::vector<LocalExample>> examples = LoadExamples(device);
  if (!examples.ok() || examples->empty()) {
    return fail(kPhaseDataReady, FailureReason::kNoData);
  }
  log.Success(kPhaseDataReady);

  std::vector<Sample> samples;
  for (const LocalExample& ex : *examples) {
    TransformResult t =
        context.transform->Apply(ex.server_features, ex.signals);
    for (double v : t.features) {
      if (!std::isfinite(v)) return fail(kPhaseTransformed, FailureReason::kTransform);
    }
    out.transformed.push_back(t.features);
    samples.push_back({std::move(t.features), ex.label});
  }
  log.Success(kPhaseTransformed);

  std::vector<Sample> kept;
  for (Sample& s : samples) {
    if (DecideSubmission(s.label, context.policy, rng)) {
      (s.label == 1 ? out.submitted_positive : out.submitted_negative) += 1;
      kept.push_back(std::move(s));
    }
  }
  if (kept.empty()) {
    return fail(kPhaseSubmission, FailureReason::kDroppedByPolicy);
  }
  log.Success(kPhaseSubmission);

  if (faults.battery_drop) {
    return fail(kPhaseTrained, FailureReason::kBatteryDrop);
  }
  absl::StatusOr<GradientUpdate> update =
      LocalTrain(*context.snapshot, kept, context.hyper,
                 context.noise_on_device, rng);
  if (!update.ok()) return fail(kPhaseTrained, FailureReason::kTraining);
  log.Success(kPhaseTrained);

  if (faults.network_loss) {
    return fail(kPhaseUploaded, FailureReason::kNetworkLoss);
  }
  log.Success(kPhaseUploaded);
  out.update = std::move(*update);
  return out;
}

absl::Status InstallModel(DeviceState& device, const ModelWeights& weights) {
  if (absl::Status s = weights.Validate(); !s.ok()) return s;
  return device.store.Put(device.key, kModelRecord, SerializeWeights(weights));
}

absl::StatusOr<double> RunInference(DeviceState& device,
                                    const CompiledTransform& transform,
                                    const NamedValues& server_features,
                                    const NamedValues& device_signals,
                                    int64_t required_version,
                                    const ModelFetcher& fetch) {
  absl::StatusOr<std::string> blob = device.store.Get(device.key, kModelRecord);
  if (!blob.ok()) {
    if (blob.status().code() == absl::StatusCode::kNotFound) {
      return absl::NotFoundError("no model installed on device");
    }
    return blob.status();
  }
  absl::StatusOr<ModelWeights> model = ParseWeights(*blob);
  if (!model.ok()) {
    return absl::DataLossError(
        fmt::format("stored model is unreadable: {}",
                    std::string(model.status().message())));
  }
  if (model->version < required_version) {
    if (!fetch) {
      return absl::FailedPreconditionError(
          fmt::format("stored model version {} is older than required {}",
                      model->version, required_version));
    }
    absl::StatusOr<ModelWeights> fresh = fetch();
    if (!fresh.ok()) return fresh.status();
    if (fresh->version < required_version) {
      return absl::FailedPreconditionError("fetched model is still stale");
    }
    if (absl::Status s = InstallModel(device, *fresh); !s.ok()) return s;
    model = std::move(fresh);
  }
  const TransformResult t = transform.Apply(server_features, device_signals);
  return Forward(*model, t.features);
}

}  // namespace fedsim
