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

#include "fedsim/device_state.h"

#include <fmt/core.h>

#include "fedsim/record.h"

namespace fedsim {

std::string_view NetworkName(NetworkClass network) {
  switch (network) {
    case NetworkClass::kOffline:
      return "offline";
    case NetworkClass::kMetered:
      return "metered";
    case NetworkClass::kUnmetered:
      return "unmetered";
  }
  return "offline";
}

std::optional<NetworkClass> ParseNetwork(std::string_view name) {
  if (name == "offline") return NetworkClass::kOffline;
  if (name == "metered") return NetworkClass::kMetered;
  if (name == "unmetered") return NetworkClass::kUnmetered;
  return std::nullopt;
}

DeviceState MakeDevice(uint64_t device_id, uint64_t key_material) {
  DeviceState device;
  device.device_id = device_id;
  device.key = DeviceKey(key_material);
  device.store = LocalStore(device.key);
  return device;
}

// Stored as one line record per example:
//   example id=<n> label=<0|1> server_<name>=<v>... signal_<name>=<v>...
absl::Status StoreExamples(DeviceState& device,
                           std::span<const LocalExample> examples) {
  std::string text;
  for (const LocalExample& ex : examples) {
    LineRecord r("example");
    r.Add("id", ex.example_id).Add("label", ex.label);
    for (const auto& [name, value] : ex.server_features) {
      r.Add("server_" + name, value);
    }
    for (const auto& [name, value] : ex.signals) {
      r.Add("signal_" + name, value);
    }
    text += r.ToLine();
    text += '\n';
  }
  return device.store.Put(device.key, kExamplesRecord, text);
}

absl::StatusOr<std::vector<LocalExample>> LoadExamples(
    const DeviceState& device) {
  absl::StatusOr<std::string> text =
      device.store.Get(device.key, kExamplesRecord);
  if (!text.ok()) return text.status();
  std::vector<LocalExample> out;
  for (std::string_view line : RecordLines(*text)) {
    absl::StatusOr<LineRecord> r = LineRecord::Parse(line);
    if (!r.ok()) return r.status();
    LocalExample ex;
    absl::StatusOr<int64_t> id = r->GetInt("id");
    absl::StatusOr<int64_t> label = r->GetInt("label");
    if (!id.ok()) return id.status();
    if (!label.ok()) return label.status();
    ex.example_id = *id;
    ex.label = static_cast<int>(*label);
    for (const auto& [key, raw] : r->fields()) {
      double value;
      if (key.rfind("server_", 0) == 0) {
        if (!ParseDouble(raw, &value)) {
          return absl::DataLossError("corrupt local example");
        }
        ex.server_features[key.substr(7)] = value;
      } else if (key.rfind("signal_", 0) == 0) {
        if (!ParseDouble(raw, &value)) {
          return absl::DataLossError("corrupt local example");
        }
        ex.signals[key.substr(7)] = value;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace fedsim
