// Copyright 2026 The xmt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

namespace xmt {

/// Flat `key = value` run configuration: file values first, then flag
/// overrides. Every command writes the resolved snapshot into its output
/// directory for reproducibility.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Overrides of the form "key=value".
  void apply_overrides(std::span<const std::string> overrides);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string require(const std::string& key) const;

  /// Sorted key = value lines.
  std::string render() const;
  void write_snapshot(const std::filesystem::path& out_dir) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace xmt
