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

#include "fedsim/transform.h"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "fedsim/record.h"

namespace fedsim {

std::string_view TransformKindName(TransformKind kind) {
  switch (kind) {
    case TransformKind::kNormalize:
      return "normalize";
    case TransformKind::kClamp:
      return "clamp";
    case TransformKind::kLog1p:
      return "log1p";
    case TransformKind::kInjectServer:
      return "inject_server";
    case TransformKind::kOverrideWithDevice:
      return "override_with_device";
  }
  return "inject_server";
}

std::optional<TransformKind> ParseTransformKind(std::string_view name) {
  for (TransformKind k :
       {TransformKind::kNormalize, TransformKind::kClamp, TransformKind::kLog1p,
        TransformKind::kInjectServer, TransformKind::kOverrideWithDevice}) {
    if (TransformKindName(k) == name) return k;
  }
  return std::nullopt;
}

std::string TransformSpec::Serialize() const {
  std::string out;
  LineRecord head("transform");
  head.Add("version", version);
  out += head.ToLine() + "\n";
  for (const TransformStep& s : steps) {
    LineRecord r("transform_step");
    r.Add("kind", TransformKindName(s.kind)).Add("feature", s.feature);
    if (s.kind == TransformKind::kNormalize ||
        s.kind == TransformKind::kClamp) {
      r.Add("a", s.a).Add("b", s.b);
    }
    out += r.ToLine() + "\n";
  }
  return out;
}

absl::StatusOr<TransformSpec> TransformSpec::Parse(std::string_view text) {
  TransformSpec spec;
  bool have_header = false;
  for (std::string_view line : RecordLines(text)) {
    absl::StatusOr<LineRecord> r = LineRecord::Parse(line);
    if (!r.ok()) return r.status();
    if (r->tag() == "transform") {
      absl::StatusOr<int64_t> v = r->GetInt("version");
      if (!v.ok()) return v.status();
      spec.version = *v;
      have_header = true;
      continue;
    }
    if (r->tag() != "transform_step") {
      return absl::InvalidArgumentError(
          fmt::format("unexpected record '{}' in transform spec", r->tag()));
    }
    TransformStep step;
    absl::StatusOr<std::string> kind = r->Get("kind");
    absl::StatusOr<std::string> feature = r->Get("feature");
    if (!kind.ok() || !feature.ok() || !ParseTransformKind(*kind)) {
      return absl::InvalidArgumentError("malformed transform_step");
    }
    step.kind = *ParseTransformKind(*kind);
    step.feature = *feature;
    if (step.kind == TransformKind::kNormalize ||
        step.kind == TransformKind::kClamp) {
      absl::StatusOr<double> a = r->GetDouble("a");
      absl::StatusOr<double> b = r->GetDouble("b");
      if (!a.ok() || !b.ok()) {
        return absl::InvalidArgumentError("transform_step needs a and b");
      }
      step.a = *a;
      step.b = *b;
    }
    spec.steps.push_back(std::move(step));
  }
  if (!have_header) {
    return absl::InvalidArgumentError("transform spec has no header");
  }
  return spec;
}

absl::StatusOr<CompiledTransform> CompiledTransform::Load(
    TransformSpec spec, FeatureSchema schema) {
  std::vector<size_t> index;
  for (const TransformStep& s : spec.steps) {
    std::optional<size_t> i = schema.IndexOf(s.feature);
    if (!i) {
      return absl::InvalidArgumentError(fmt::format(
          "transform step {} references unknown feature '{}'",
          TransformKindName(s.kind), s.feature));
    }
    if (!std::isfinite(s.a) || !std::isfinite(s.b)) {
      return absl::InvalidArgumentError("transform parameters must be finite");
    }
    if (s.kind == TransformKind::kClamp && s.a > s.b) {
      return absl::InvalidArgumentError("clamp bounds are inverted");
    }
    if (s.kind == TransformKind::kNormalize && s.b < 0) {
      return absl::InvalidArgumentError("normalize stddev is negative");
    }
    index.push_back(*i);
  }
  return CompiledTransform(std::move(spec), std::move(schema),
                           std::move(index));
}

TransformResult CompiledTransform::Apply(
    const NamedValues& server_features,
    const NamedValues& device_signals) const {
  TransformResult out;
  out.features.assign(schema_.size(), 0.0);
  for (size_t k = 0; k < spec_.steps.size(); ++k) {
    const TransformStep& s = spec_.steps[k];
    double& x = out.features[index_[k]];
    switch (s.kind) {
      case TransformKind::kInjectServer:
        if (auto it = server_features.find(s.feature);
            it != server_features.end()) {
          x = it->second;
        } else {
          x = 0.0;
          out.failed_steps.push_back(
              fmt::format("inject_server:{}", s.feature));
        }
        break;
      case TransformKind::kOverrideWithDevice:
        if (auto it = device_signals.find(s.feature);
            it != device_signals.end()) {
          x = it->second;
        }
        break;
      case TransformKind::kNormalize:
        x = s.b > 0 ? (x - s.a) / s.b : 0.0;
        break;
      case TransformKind::kClamp:
        x = std::clamp(x, s.a, s.b);
        break;
      case TransformKind::kLog1p:
        if (x > -1.0) {
          x = std::log1p(x);
        } else {
          x = 0.0;
          out.failed_steps.push_back(fmt::format("log1p:{}", s.feature));
        }
        break;
    }
  }
  return out;
}

TransformSpec MakeStandardSpec(const FeatureSchema& schema,
                               const FeatureStats* stats, int64_t version) {
  TransformSpec spec;
  spec.version = version;
  for (const FeatureDescriptor& f : schema.features()) {
    if (f.origin != FeatureOrigin::kDevice) {
      spec.steps.push_back({TransformKind::kInjectServer, f.name});
    }
    if (f.origin != FeatureOrigin::kServer) {
      spec.steps.push_back({TransformKind::kOverrideWithDevice, f.name});
    }
    spec.steps.push_back({TransformKind::kClamp, f.name, f.lo, f.hi});
    if (stats != nullptr) {
      if (const FeatureStat* s = stats->Find(f.name); s != nullptr) {
        spec.steps.push_back(
            {TransformKind::kNormalize, f.name, s->mean, s->stddev});
      }
    }
  }
  return spec;
}

}  // namespace fedsim
