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

#include "fedsim/joiner.h"

#include <map>

#include <fmt/core.h>

namespace fedsim {

std::string_view LabelSourceName(LabelSource source) {
  switch (source) {
    case LabelSource::kServerEvent:
      return "server_event";
    case LabelSource::kHumanRater:
      return "human_rater";
    case LabelSource::kDeviceEvent:
      return "device_event";
  }
  return "server_event";
}

std::optional<LabelSource> ParseLabelSource(std::string_view name) {
  if (name == "server_event") return LabelSource::kServerEvent;
  if (name == "human_rater") return LabelSource::kHumanRater;
  if (name == "device_event") return LabelSource::kDeviceEvent;
  return std::nullopt;
}

absl::StatusOr<ServerFeatureRecord> MakeServerRecord(
    const FeatureSchema& schema, int64_t example_id, NamedValues values) {
  for (const auto& [name, value] : values) {
    const FeatureDescriptor* f = schema.Find(name);
    if (f == nullptr) {
      return absl::InvalidArgumentError(
          fmt::format("unknown feature '{}' in server record", name));
    }
    if (f->origin == FeatureOrigin::kDevice) {
      return absl::InvalidArgumentError(fmt::format(
          "device-only feature '{}' cannot appear in a server record", name));
    }
  }
  return ServerFeatureRecord{example_id, std::move(values)};
}

absl::StatusOr<JoinResult> Join(std::span<const ServerFeatureRecord> features,
                                std::span<const LabelRecord> labels) {
  std::map<int64_t, const ServerFeatureRecord*> by_id;
  for (const ServerFeatureRecord& f : features) {
    if (!by_id.emplace(f.example_id, &f).second) {
      return absl::InvalidArgumentError(
          fmt::format("duplicate feature record for example {}", f.example_id));
    }
  }
  std::map<int64_t, const LabelRecord*> label_by_id;
  for (const LabelRecord& l : labels) {
    if (l.label != 0 && l.label != 1) {
      return absl::InvalidArgumentError(
          fmt::format("label for example {} is not binary", l.example_id));
    }
    if (!label_by_id.emplace(l.example_id, &l).second) {
      return absl::InvalidArgumentError(
          fmt::format("duplicate label for example {}", l.example_id));
    }
  }
  JoinResult result;
  for (const auto& [id, record] : by_id) {
    auto it = label_by_id.find(id);
    if (it == label_by_id.end()) {
      result.unmatched_feature_ids.push_back(id);
      continue;
    }
    result.joined.push_back({id, record->values, it->second->label});
  }
  for (const auto& [id, label] : label_by_id) {
    if (!by_id.contains(id)) result.unmatched_label_ids.push_back(id);
  }
  return result;
}

}  // namespace fedsim
