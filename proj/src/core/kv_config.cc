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

#include "viscade/core/kv_config.h"

#include <cstdlib>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text, std::string_view origin) {
  KvConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw_error(ErrorCode::kConfig, std::string(origin) + ":" +
                                          std::to_string(line_no) +
                                          ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw_error(ErrorCode::kConfig, std::string(origin) + ":" +
                                          std::to_string(line_no) + ": empty key");
    }
    cfg.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  return parse(read_file_text(path), path.string());
}

void KvConfig::set(std::string key, std::string value) {
  entries_[std::move(key)] = std::move(value);
}

bool KvConfig::contains(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::optional<std::string> KvConfig::get(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::get_string(std::string_view key,
                                 std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

std::string KvConfig::require_string(std::string_view key) const {
  auto v = get(key);
  if (!v) throw_error(ErrorCode::kConfig, "missing config key " + std::string(key));
  return *v;
}

long long KvConfig::get_int(std::string_view key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    long long out = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw_error(ErrorCode::kConfig,
                "config key " + std::string(key) + " is not an integer: " + *v);
  }
}

double KvConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double out = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw_error(ErrorCode::kConfig,
                "config key " + std::string(key) + " is not a number: " + *v);
  }
}

bool KvConfig::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw_error(ErrorCode::kConfig,
              "config key " + std::string(key) + " is not a boolean: " + *v);
}

std::vector<std::string> KvConfig::keys_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (auto it = entries_.lower_bound(prefix);
       it != entries_.end() && it->first.starts_with(prefix); ++it) {
    out.push_back(it->first);
  }
  return out;
}

void KvConfig::apply_env(const char* env_name, std::string key) {
  if (const char* v = std::getenv(env_name); v != nullptr && *v != '\0') {
    set(std::move(key), v);
  }
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  while (!text.empty()) {
    const auto pos = text.find(sep);
    auto item = trim(text.substr(0, pos));
    if (!item.empty()) out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    text = text.substr(pos + 1);
  }
  return out;
}

}  // namespace viscade
