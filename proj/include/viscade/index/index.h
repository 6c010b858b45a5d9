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

#ifndef VISCADE_INDEX_INDEX_H_
#define VISCADE_INDEX_INDEX_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "viscade/index/doc.h"
#include "viscade/index/models.h"
#include "viscade/index/shard.h"
#include "viscade/rank/feature_row.h"
#include "viscade/rank/text_match.h"

namespace viscade::index {

inline constexpr std::uint32_t kIndexFormatVersion = 1;

struct FileEntry {
  std::uint64_t size = 0;
  std::string md5;

  friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

struct ShardManifest {
  std::uint32_t shard_id = 0;
  std::uint64_t doc_count = 0;
  std::uint64_t posting_count = 0;
  std::map<std::string, FileEntry> files;  // file name -> size and digest

  friend bool operator==(const ShardManifest&, const ShardManifest&) = default;
};

struct FamilyInfo {
  std::string name;
  std::size_t dim = 0;
  std::string role;  // "L1" or "L2"
  std::size_t code_bytes = 0;
  bool raw = false;

  friend bool operator==(const FamilyInfo&, const FamilyInfo&) = default;
};

struct IndexManifest {
  std::uint32_t version = kIndexFormatVersion;
  std::uint32_t shards = 1;
  std::uint64_t doc_count = 0;
  std::string l1_family;
  std::vector<FamilyInfo> families;
  std::map<std::string, std::string> model_digests;  // models/<file> -> md5
  std::string text_stats_digest;
  nlohmann::json registry;
  std::string build_timestamp;
  std::vector<ShardManifest> shard_manifests;

  nlohmann::json to_json() const;
  static IndexManifest from_json(const nlohmann::json& j);
};

// Where a document lives.
struct DocLocation {
  std::uint32_t shard = 0;
  std::size_t ordinal = 0;
};

class Index {
 public:
  // Throws kBuild on a duplicate id, kConfig on a family without a trained
  // quantizer, kDimMismatch when a vector has the wrong size.
  static Index build(std::span<const ImageDoc> docs, IndexModels models,
                     const IndexBuildConfig& config);

  // Writes manifest.json, models/ and shard_<i>.* files. Returns the
  // manifest as written, with file digests filled in.
  IndexManifest save(const std::filesystem::path& dir) const;
  // Verifies every file digest listed in the manifest before decoding.
  static Index load(const std::filesystem::path& dir);

  const IndexManifest& manifest() const { return manifest_; }
  const IndexModels& models() const { return models_; }
  const std::vector<Shard>& shards() const { return shards_; }
  const rank::FeatureRegistry& registry() const { return registry_; }
  const rank::TextStats& text_stats() const { return text_stats_; }
  std::size_t doc_count() const { return manifest_.doc_count; }

  std::optional<DocLocation> locate(std::uint64_t image_id) const;
  // Rebuilds the stored view of a document: metadata plus raw vectors.
  std::optional<feature::FeatureBundle> stored_bundle(std::uint64_t image_id) const;
  feature::FeatureBundle stored_bundle(const DocLocation& loc) const;

 private:
  IndexManifest manifest_;
  IndexModels models_;
  std::vector<Shard> shards_;
  rank::FeatureRegistry registry_;
  rank::TextStats text_stats_;
};

}  // namespace viscade::index

#endif  // VISCADE_INDEX_INDEX_H_
