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

#ifndef FEDSIM_DEVICE_STATE_H_
#define FEDSIM_DEVICE_STATE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/local_store.h"
#include "fedsim/schema.h"

namespace fedsim {

// Ordered from worst to best connectivity.
enum class NetworkClass { kOffline = 0, kMetered = 1, kUnmetered = 2 };

std::string_view NetworkName(NetworkClass network);
std::optional<NetworkClass> ParseNetwork(std::string_view name);

// One locally held training example: the server-side features delivered to
// the device, the device's own signals and the label.
struct LocalExample {
  int64_t example_id = 0;
  NamedValues server_features;
  NamedValues signals;
  int label = 0;
};

inline constexpr std::string_view kExamplesRecord = "examples";
inline constexpr std::string_view kModelRecord = "model";

// A simulated device. `device_id` exists only inside the simulation and must
// never be copied into any record that leaves the device.
struct DeviceState {
  uint64_t device_id = 0;
  DeviceKey key{0};
  double battery = 1.0;
  NetworkClass network = NetworkClass::kUnmetered;
  bool idle = true;
  int64_t free_storage_bytes = 0;
  int app_version = 1;
  int signal_ticks = 0;  // simulated time spent accumulating signals
  LocalStore store{DeviceKey(0)};
};

// Creates a device whose store is sealed with `key_material`.
DeviceState MakeDevice(uint64_t device_id, uint64_t key_material);

absl::Status StoreExamples(DeviceState& device,
                           std::span<const LocalExample> examples);
absl::StatusOr<std::vector<LocalExample>> LoadExamples(
    const DeviceState& device);

}  // namespace fedsim

#endif  // FEDSIM_DEVICE_STATE_H_
