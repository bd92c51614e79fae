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

#ifndef FEDSIM_SCHEMA_H_
#define FEDSIM_SCHEMA_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"

namespace fedsim {

// Named scalar values (signals, server features). Ordered for determinism.
using NamedValues = std::map<std::string, double, std::less<>>;

// Where a feature's value originates. BOTH features are served from the
// server and overwritten by the device's own copy when one is available.
enum class FeatureOrigin { kServer, kDevice, kBoth };

std::string_view OriginName(FeatureOrigin origin);
std::optional<FeatureOrigin> ParseOrigin(std::string_view name);

struct FeatureDescriptor {
  std::string name;
  FeatureOrigin origin = FeatureOrigin::kServer;
  double lo = 0.0;  // declared clipping range
  double hi = 1.0;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;

  // Names must be unique record tokens and ranges non-degenerate.
  static absl::StatusOr<FeatureSchema> Create(
      std::vector<FeatureDescriptor> features);

  const std::vector<FeatureDescriptor>& features() const { return features_; }
  size_t size() const { return features_.size(); }
  const FeatureDescriptor* Find(std::string_view name) const;
  std::optional<size_t> IndexOf(std::string_view name) const;

 private:
  explicit FeatureSchema(std::vector<FeatureDescriptor> features)
      : features_(std::move(features)) {}

  std::vector<FeatureDescriptor> features_;
};

}  // namespace fedsim

#endif  // FEDSIM_SCHEMA_H_
