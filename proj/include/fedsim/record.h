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

// Line-oriented structured records shared by every exported artifact.
//
// One record per line:
//
//   <tag> <key>=<value> <key>=<value> ...
//
// Tags and keys are [a-z0-9_]+. Values are non-empty and contain neither
// whitespace nor '='. Doubles are written with 17 significant digits, which
// round-trips every finite IEEE double exactly. Field order is preserved and
// is part of each record type's documented format.

#ifndef FEDSIM_RECORD_H_
#define FEDSIM_RECORD_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedsim {

class LineRecord {
 public:
  LineRecord() = default;
  explicit LineRecord(std::string tag) : tag_(std::move(tag)) {}

  const std::string& tag() const { return tag_; }
  const std::vector<std::pair<std::string, std::string>>& fields() const {
    return fields_;
  }

  LineRecord& Add(std::string_view key, std::string_view value);
  LineRecord& Add(std::string_view key, const char* value) {
    return Add(key, std::string_view(value));
  }
  LineRecord& Add(std::string_view key, double value);
  LineRecord& Add(std::string_view key, int64_t value);
  LineRecord& Add(std::string_view key, int value) {
    return Add(key, static_cast<int64_t>(value));
  }
  LineRecord& Add(std::string_view key, uint64_t value);
  LineRecord& Add(std::string_view key, bool value) {
    return Add(key, value ? std::string_view("1") : std::string_view("0"));
  }

  bool Has(std::string_view key) const;
  absl::StatusOr<std::string> Get(std::string_view key) const;
  absl::StatusOr<double> GetDouble(std::string_view key) const;
  absl::StatusOr<int64_t> GetInt(std::string_view key) const;

  std::string ToLine() const;
  static absl::StatusOr<LineRecord> Parse(std::string_view line);

 private:
  std::string tag_;
  std::vector<std::pair<std::string, std::string>> fields_;
};

// Formats a double so that parsing it back yields the identical value.
std::string FormatDouble(double value);

// Splits text into lines, skipping blank lines and lines starting with '#'.
std::vector<std::string_view> RecordLines(std::string_view text);

bool IsValidToken(std::string_view token);

// Splits on any of `delims`, dropping empty pieces.
std::vector<std::string_view> SplitTokens(std::string_view text,
                                          std::string_view delims = " \t");

// Whole-string numeric parsing. ParseDouble accepts decimal and C99 hex
// floats as well as "inf"/"nan" so callers can reject those explicitly.
bool ParseInt64(std::string_view text, int64_t* value);
bool ParseDouble(std::string_view text, double* value);

}  // namespace fedsim

#endif  // FEDSIM_RECORD_H_
