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

// Declarative on-device signal transformation.
//
// A TransformSpec is an ordered list of steps over a working vector laid out
// by the feature schema. The vector starts at zero; inject_server copies the
// server value in, override_with_device replaces it with the device's own
// signal when present, and normalize/clamp/log1p rewrite it in place. Specs
// are plain data so a new version can be pushed without an app release:
//
//   transform version=<n>
//   transform_step kind=<normalize|clamp|log1p|inject_server|
//                        override_with_device> feature=<name> [a=<v> b=<v>]
//
// For normalize a and b are the mean and standard deviation; for clamp they
// are the bounds.

#ifndef FEDSIM_TRANSFORM_H_
#define FEDSIM_TRANSFORM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/analytics.h"
#include "fedsim/schema.h"

namespace fedsim {

enum class TransformKind {
  kNormalize,
  kClamp,
  kLog1p,
  kInjectServer,
  kOverrideWithDevice,
};

std::string_view TransformKindName(TransformKind kind);
std::optional<TransformKind> ParseTransformKind(std::string_view name);

struct TransformStep {
  TransformKind kind = TransformKind::kInjectServer;
  std::string feature;
  double a = 0;
  double b = 0;
};

struct TransformSpec {
  int64_t version = 1;
  std::vector<TransformStep> steps;

  std::string Serialize() const;
  static absl::StatusOr<TransformSpec> Parse(std::string_view text);
};

struct TransformResult {
  std::vector<double> features;  // schema order
  // Steps that fell back to a default, as "<kind>:<feature>".
  std::vector<std::string> failed_steps;
};

// A spec checked against a schema with feature references resolved.
class CompiledTransform {
 public:
  // Rejects unknown features, non-finite parameters, lo > hi clamps and
  // negative standard deviations.
  static absl::StatusOr<CompiledTransform> Load(TransformSpec spec,
                                                FeatureSchema schema);

  TransformResult Apply(const NamedValues& server_features,
                        const NamedValues& device_signals) const;

  const TransformSpec& spec() const { return spec_; }
  const FeatureSchema& schema() const { return schema_; }
  int64_t version() const { return spec_.version; }

 private:
  CompiledTransform(TransformSpec spec, FeatureSchema schema,
                    std::vector<size_t> index)
      : spec_(std::move(spec)),
        schema_(std::move(schema)),
        index_(std::move(index)) {}

  TransformSpec spec_;
  FeatureSchema schema_;
  std::vector<size_t> index_;  // per step
};

// Injects SERVER and BOTH features, overrides DEVICE and BOTH features with
// device signals, clamps every feature to its declared range and, when
// `stats` is given, z-scores each feature with the estimated moments.
TransformSpec MakeStandardSpec(const FeatureSchema& schema,
                               const FeatureStats* stats, int64_t version);

}  // namespace fedsim

#endif  // FEDSIM_TRANSFORM_H_
