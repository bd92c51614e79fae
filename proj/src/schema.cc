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

#include "fedsim/schema.h"

#include <cmath>
#include <set>

#include <fmt/core.h>

#include "fedsim/record.h"

namespace fedsim {

std::string_view OriginName(FeatureOrigin origin) {
  switch (origin) {
    case FeatureOrigin::kServer:
      return "server";
    case FeatureOrigin::kDevice:
      return "device";
    case FeatureOrigin::kBoth:
      return "both";
  }
  return "server";
}

std::optional<FeatureOrigin> ParseOrigin(std::string_view name) {
  if (name == "server") return FeatureOrigin::kServer;
  if (name == "device") return FeatureOrigin::kDevice;
  if (name == "both") return FeatureOrigin::kBoth;
  return std::nullopt;
}

absl::StatusOr<FeatureSchema> FeatureSchema::Create(
    std::vector<FeatureDescriptor> features) {
  std::set<std::string, std::less<>> names;
  for (const FeatureDescriptor& f : features) {
    if (!IsValidToken(f.name)) {
      return absl::InvalidArgumentError(
          fmt::format("feature name '{}' is not a token", f.name));
    }
    if (!names.insert(f.name).second) {
      return absl::InvalidArgumentError(
          fmt::format("duplicate feature name '{}'", f.name));
    }
    if (!(f.lo < f.hi) || !std::isfinite(f.lo) || !std::isfinite(f.hi)) {
      return absl::InvalidArgumentError(
          fmt::format("feature '{}' has degenerate range", f.name));
    }
  }
  return FeatureSchema(std::move(features));
}

const FeatureDescriptor* FeatureSchema::Find(std::string_view name) const {
  for (const FeatureDescriptor& f : features_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::optional<size_t> FeatureSchema::IndexOf(std::string_view name) const {
  for (size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

}  // namespace fedsim
