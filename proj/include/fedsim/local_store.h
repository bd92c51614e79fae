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

// Dedicated on-device storage for training and inference data.
//
// Records are sealed: the bytes held are masked with a keystream derived from
// the owning device's key, and every read or write must present that key.
// This models the trust boundary only; the masking is not a cipher.

#ifndef FEDSIM_LOCAL_STORE_H_
#define FEDSIM_LOCAL_STORE_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedsim {

class DeviceKey {
 public:
  explicit DeviceKey(uint64_t material) : material_(material) {}

  uint64_t Fingerprint() const;
  // Exposed for fixture export only.
  uint64_t material() const { return material_; }

 private:
  friend class LocalStore;
  uint64_t material_;
};

class LocalStore {
 public:
  explicit LocalStore(const DeviceKey& owner)
      : owner_fingerprint_(owner.Fingerprint()) {}

  absl::Status Put(const DeviceKey& key, std::string_view name,
                   std::string_view bytes);
  absl::StatusOr<std::string> Get(const DeviceKey& key,
                                  std::string_view name) const;
  absl::Status Remove(const DeviceKey& key, std::string_view name);
  bool Contains(std::string_view name) const;
  size_t size() const { return sealed_.size(); }

  // Raw sealed bytes, as an observer without the key would see them.
  const std::string* SealedBytes(std::string_view name) const;

 private:
  absl::Status CheckKey(const DeviceKey& key) const;
  static std::string Mask(const DeviceKey& key, std::string_view name,
                          std::string_view bytes);

  uint64_t owner_fingerprint_;
  std::map<std::string, std::string, std::less<>> sealed_;
};

}  // namespace fedsim

#endif  // FEDSIM_LOCAL_STORE_H_
