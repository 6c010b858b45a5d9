// Copyright 2026 The Viscade Authors.
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

#ifndef VISCADE_CORE_KV_CONFIG_H_
#define VISCADE_CORE_KV_CONFIG_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace viscade {

// Flat `key = value` configuration. Lines starting with '#' are comments;
// later assignments override earlier ones.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text, std::string_view origin = "<string>");
  static KvConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;

  std::optional<std::string> get(std::string_view key) const;
  std::string get_string(std::string_view key, std::string_view fallback) const;
  std::string require_string(std::string_view key) const;
  long long get_int(std::string_view key, long long fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  // Keys that start with `prefix`, in sorted order.
  std::vector<std::string> keys_with_prefix(std::string_view prefix) const;

  // Overrides `key` with the environment variable `env_name` when it is set.
  void apply_env(const char* env_name, std::string key);

  const std::map<std::string, std::string, std::less<>>& entries() const {
    return entries_;
  }

  // Canonical text form (sorted keys); stable input for digests.
  std::string canonical() const;

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

std::vector<std::string> split_list(std::string_view text, char sep = ',');

}  // namespace viscade

#endif  // VISCADE_CORE_KV_CONFIG_H_
