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

#include "fedsim/record.h"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include <fmt/core.h>

namespace fedsim {
namespace {

bool IsValidValue(std::string_view value) {
  if (value.empty()) return false;
  for (char c : value) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '=') return false;
  }
  return true;
}

}  // namespace

bool IsValidToken(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_')) {
      return false;
    }
  }
  return true;
}

std::vector<std::string_view> SplitTokens(std::string_view text,
                                          std::string_view delims) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t start = text.find_first_not_of(delims, pos);
    if (start == std::string_view::npos) break;
    size_t end = text.find_first_of(delims, start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    pos = end;
  }
  return out;
}

bool ParseInt64(std::string_view text, int64_t* value) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   *value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool ParseDouble(std::string_view text, double* value) {
  if (text.empty()) return false;
  // strtod handles hex floats with their "0x" prefix; from_chars does not.
  std::string copy(text);
  char* end = nullptr;
  *value = std::strtod(copy.c_str(), &end);
  return end == copy.c_str() + copy.size();
}

std::string FormatDouble(double value) { return fmt::format("{:.17g}", value); }

LineRecord& LineRecord::Add(std::string_view key, std::string_view value) {
  fields_.emplace_back(std::string(key), std::string(value));
  return *this;
}

LineRecord& LineRecord::Add(std::string_view key, double value) {
  return Add(key, std::string_view(FormatDouble(value)));
}

LineRecord& LineRecord::Add(std::string_view key, int64_t value) {
  return Add(key, std::string_view(std::to_string(value)));
}

LineRecord& LineRecord::Add(std::string_view key, uint64_t value) {
  return Add(key, std::string_view(std::to_string(value)));
}

bool LineRecord::Has(std::string_view key) const {
  for (const auto& [k, v] : fields_) {
    if (k == key) return true;
  }
  return false;
}

absl::StatusOr<std::string> LineRecord::Get(std::string_view key) const {
  for (const auto& [k, v] : fields_) {
    if (k == key) return v;
  }
  return absl::NotFoundError(
      fmt::format("record '{}' has no field '{}'", tag_, key));
}

absl::StatusOr<double> LineRecord::GetDouble(std::string_view key) const {
  absl::StatusOr<std::string> raw = Get(key);
  if (!raw.ok()) return raw.status();
  double value;
  if (!ParseDouble(*raw, &value)) {
    return absl::InvalidArgumentError(
        fmt::format("field '{}' is not a number: {}", key, *raw));
  }
  return value;
}

absl::StatusOr<int64_t> LineRecord::GetInt(std::string_view key) const {
  absl::StatusOr<std::string> raw = Get(key);
  if (!raw.ok()) return raw.status();
  int64_t value;
  if (!ParseInt64(*raw, &value)) {
    return absl::InvalidArgumentError(
        fmt::format("field '{}' is not an integer: {}", key, *raw));
  }
  return value;
}

std::string LineRecord::ToLine() const {
  std::string line = tag_;
  for (const auto& [k, v] : fields_) {
    line += ' ';
    line += k;
    line += '=';
    line += v;
  }
  return line;
}

absl::StatusOr<LineRecord> LineRecord::Parse(std::string_view line) {
  std::vector<std::string_view> parts = SplitTokens(line);
  if (parts.empty()) return absl::InvalidArgumentError("empty record line");
  if (!IsValidToken(parts[0])) {
    return absl::InvalidArgumentError(
        fmt::format("invalid record tag: {}", parts[0]));
  }
  LineRecord record{std::string(parts[0])};
  for (size_t i = 1; i < parts.size(); ++i) {
    size_t eq = parts[i].find('=');
    if (eq == std::string_view::npos) {
      return absl::InvalidArgumentError(
          fmt::format("field without '=': {}", parts[i]));
    }
    std::string_view key = parts[i].substr(0, eq);
    std::string_view value = parts[i].substr(eq + 1);
    if (!IsValidToken(key) || !IsValidValue(value)) {
      return absl::InvalidArgumentError(
          fmt::format("malformed field: {}", parts[i]));
    }
    if (record.Has(key)) {
      return absl::InvalidArgumentError(fmt::format("duplicate field: {}", key));
    }
    record.Add(key, value);
  }
  return record;
}

std::vector<std::string_view> RecordLines(std::string_view text) {
  std::vector<std::string_view> out;
  for (std::string_view line : SplitTokens(text, "\n")) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' ||
                             line.back() == '\t')) {
      line.remove_suffix(1);
    }
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string_view::npos) continue;
    line.remove_prefix(start);
    if (line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace fedsim
