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

#include "fedsim/local_store.h"

#include <fmt/core.h>

#include "fedsim/rng.h"

namespace fedsim {

uint64_t DeviceKey::Fingerprint() const {
  return SplitMix64(material_ ^ 0x5ea1ed5ea1ed5ea1ULL);
}

absl::Status LocalStore::CheckKey(const DeviceKey& key) const {
  if (key.Fingerprint() != owner_fingerprint_) {
    return absl::PermissionDeniedError("local store key mismatch");
  }
  return absl::OkStatus();
}

std::string LocalStore::Mask(const DeviceKey& key, std::string_view name,
                             std::string_view bytes) {
  uint64_t state = key.material_;
  for (char c : name) state = SplitMix64(state ^ static_cast<uint8_t>(c));
  std::string out(bytes);
  uint64_t block = 0;
  for (size_t i = 0; i < out.size(); ++i) {
    if (i % 8 == 0) block = SplitMix64(state + i);
    out[i] = static_cast<char>(static_cast<uint8_t>(out[i]) ^
                               static_cast<uint8_t>(block >> (8 * (i % 8))));
  }
  return out;
}

absl::Status LocalStore::Put(const DeviceKey& key, std::string_view name,
                             std::string_view bytes) {
  if (absl::Status s = CheckKey(key); !s.ok()) return s;
  sealed_[std::string(name)] = Mask(key, name, bytes);
  return absl::OkStatus();
}

absl::StatusOr<std::string> LocalStore::Get(const DeviceKey& key,
                                            std::string_view name) const {
  if (absl::Status s = CheckKey(key); !s.ok()) return s;
  auto it = sealed_.find(name);
  if (it == sealed_.end()) {
    return absl::NotFoundError(fmt::format("no local record '{}'", name));
  }
  return Mask(key, name, it->second);
}

absl::Status LocalStore::Remove(const DeviceKey& key, std::string_view name) {
  if (absl::Status s = CheckKey(key); !s.ok()) return s;
  auto it = sealed_.find(name);
  if (it == sealed_.end()) {
    return absl::NotFoundError(fmt::format("no local record '{}'", name));
  }
  sealed_.erase(it);
  return absl::OkStatus();
}

bool LocalStore::Contains(std::string_view name) const {
  return sealed_.find(name) != sealed_.end();
}

const std::string* LocalStore::SealedBytes(std::string_view name) const {
  auto it = sealed_.find(name);
  return it == sealed_.end() ? nullptr : &it->second;
}

}  // namespace fedsim
