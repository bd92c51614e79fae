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

// Server-side joiner: pairs labels with server feature records.

#ifndef FEDSIM_JOINER_H_
#define FEDSIM_JOINER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/schema.h"

namespace fedsim {

enum class LabelSource { kServerEvent, kHumanRater, kDeviceEvent };

std::string_view LabelSourceName(LabelSource source);
std::optional<LabelSource> ParseLabelSource(std::string_view name);

// Server-held features for one example. Only SERVER and BOTH features may
// appear; use MakeServerRecord to enforce that against a schema.
struct ServerFeatureRecord {
  int64_t example_id = 0;
  NamedValues values;
};

absl::StatusOr<ServerFeatureRecord> MakeServerRecord(
    const FeatureSchema& schema, int64_t example_id, NamedValues values);

struct LabelRecord {
  int64_t example_id = 0;
  int label = 0;
  LabelSource source = LabelSource::kServerEvent;
};

struct JoinedExample {
  int64_t example_id = 0;
  NamedValues server_features;
  int label = 0;
};

struct JoinResult {
  std::vector<JoinedExample> joined;  // ascending example_id
  std::vector<int64_t> unmatched_feature_ids;
  std::vector<int64_t> unmatched_label_ids;
};

// Inner join on example id. Duplicate ids on either side and labels outside
// {0, 1} are errors; records without a partner are reported, not dropped
// silently. The result does not depend on input order.
absl::StatusOr<JoinResult> Join(std::span<const ServerFeatureRecord> features,
                                std::span<const LabelRecord> labels);

}  // namespace fedsim

#endif  // FEDSIM_JOINER_H_
