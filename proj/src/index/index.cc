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

#include "viscade/index/index.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <numeric>
#include <random>
#include <set>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"
#include "viscade/core/thread_pool.h"

namespace viscade::index {
namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kModelsDir = "models";
constexpr const char* kTextStatsFile = "text_stats.bin";
constexpr std::size_t kScaleSampleRows = 4000;

std::string shard_file(std::uint32_t shard, const std::string& suffix) {
  return "shard_" + std::to_string(shard) + "." + suffix;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double family_scale(std::span<const ImageDoc> docs, const std::string& family,
                    std::size_t pairs, std::uint64_t seed) {
  std::vector<std::size_t> with;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].features.embedding(family)) with.push_back(i);
  }
  if (with.size() > kScaleSampleRows) {
    std::mt19937_64 rng(seed);
    std::shuffle(with.begin(), with.end(), rng);
    with.resize(kScaleSampleRows);
    std::sort(with.begin(), with.end());
  }
  Matrix sample;
  for (auto i : with) sample.append_row(*docs[i].features.embedding(family));
  return rank::median_pairwise_sq_distance(sample, pairs, seed);
}

FileEntry entry_for(std::span<const std::uint8_t> bytes) {
  return {bytes.size(), md5(bytes).hex()};
}

std::vector<std::uint8_t> read_verified(const std::filesystem::path& path,
                                        const FileEntry& expected, const std::string& context) {
  if (!std::filesystem::exists(path)) {
    throw_error(ErrorCode::kIntegrity, context + ": missing file " + path.filename().string());
  }
  auto bytes = read_file_bytes(path);
  if (bytes.size() != expected.size) {
    throw_error(ErrorCode::kIntegrity,
                context + ": " + path.filename().string() + " has " +
                    std::to_string(bytes.size()) + " bytes, manifest says " +
                    std::to_string(expected.size) + " (truncated?)");
  }
  if (md5(bytes).hex() != expected.md5) {
    throw_error(ErrorCode::kIntegrity,
                context + ": " + path.filename().string() + " digest does not match manifest");
  }
  return bytes;
}

}  // namespace

nlohmann::json IndexManifest::to_json() const {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& f : families) {
    fams.push_back({{"name", f.name},
                    {"dim", f.dim},
                    {"role", f.role},
                    {"code_bytes", f.code_bytes},
                    {"raw", f.raw}});
  }
  nlohmann::json shard_list = nlohmann::json::array();
  for (const auto& s : shard_manifests) {
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [name, e] : s.files) files[name] = {{"size", e.size}, {"md5", e.md5}};
    shard_list.push_back({{"shard_id", s.shard_id},
                          {"doc_count", s.doc_count},
                          {"posting_count", s.posting_count},
                          {"files", files}});
  }
  return {{"format", "viscade-index"},
          {"version", version},
          {"shards", shards},
          {"doc_count", doc_count},
          {"l1_family", l1_family},
          {"families", fams},
          {"model_digests", model_digests},
          {"text_stats_digest", text_stats_digest},
          {"registry", registry},
          {"build_timestamp", build_timestamp},
          {"shard_manifests", shard_list}};
}

IndexManifest IndexManifest::from_json(const nlohmann::json& j) {
  IndexManifest m;
  try {
    require(j.at("format").get<std::string>() == "viscade-index", ErrorCode::kLoad,
            "not an index manifest");
    m.version = j.at("version").get<std::uint32_t>();
    require(m.version == kIndexFormatVersion, ErrorCode::kLoad,
            "index format version " + std::to_string(m.version) + " is not supported (expected " +
                std::to_string(kIndexFormatVersion) + ")");
    m.shards = j.at("shards").get<std::uint32_t>();
    m.doc_count = j.at("doc_count").get<std::uint64_t>();
    m.l1_family = j.at("l1_family").get<std::string>();
    for (const auto& f : j.at("families")) {
      m.families.push_back({f.at("name").get<std::string>(), f.at("dim").get<std::size_t>(),
                            f.at("role").get<std::string>(),
                            f.at("code_bytes").get<std::size_t>(), f.at("raw").get<bool>()});
    }
    m.model_digests = j.at("model_digests").get<std::map<std::string, std::string>>();
    m.text_stats_digest = j.at("text_stats_digest").get<std::string>();
    m.registry = j.at("registry");
    m.build_timestamp = j.value("build_timestamp", "");
    for (const auto& s : j.at("shard_manifests")) {
      ShardManifest sm;
      sm.shard_id = s.at("shard_id").get<std::uint32_t>();
      sm.doc_count = s.at("doc_count").get<std::uint64_t>();
      sm.posting_count = s.at("posting_count").get<std::uint64_t>();
      for (const auto& [name, e] : s.at("files").items()) {
        sm.files[name] = {e.at("size").get<std::uint64_t>(), e.at("md5").get<std::string>()};
      }
      m.shard_manifests.push_back(std::move(sm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::kLoad, std::string("malformed index manifest: ") + e.what());
  }
  require(m.shards >= 1 && m.shard_manifests.size() == m.shards, ErrorCode::kLoad,
          "manifest shard list does not match its shard count");
  return m;
}

Index Index::build(std::span<const ImageDoc> docs, IndexModels models,
                   const IndexBuildConfig& config) {
  require(config.shards >= 1, ErrorCode::kConfig, "shard count must be >= 1");
  const std::string l1 = config.l1_family.empty() ? models.l1_family : config.l1_family;
  require(l1 == models.l1_family, ErrorCode::kConfig,
          "configured L1 family " + l1 + " differs from the models' " + models.l1_family);
  {
    std::vector<std::uint64_t> ids;
    ids.reserve(docs.size());
    for (const auto& d : docs) ids.push_back(d.image_id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) {
      throw_error(ErrorCode::kBuild, "duplicate image id " + std::to_string(*dup));
    }
  }

  std::vector<std::string> l2 = config.l2_families;
  if (l2.empty()) {
    for (const auto& [name, q] : models.quantizers) l2.push_back(name);
  }
  std::sort(l2.begin(), l2.end());
  l2.erase(std::unique(l2.begin(), l2.end()), l2.end());
  for (const auto& f : l2) {
    if (!models.quantizers.contains(f)) {
      throw_error(ErrorCode::kConfig, "unknown feature family '" + f +
                                          "': no trained quantizer in the models");
    }
  }
  require(models.quantizers.contains(l1), ErrorCode::kConfig,
          "unknown feature family '" + l1 + "' configured as L1");
  if (std::find(l2.begin(), l2.end(), l1) == l2.end()) l2.insert(l2.begin(), l1);
  std::sort(l2.begin(), l2.end());

  std::vector<std::size_t> code_bytes, dims;
  for (const auto& f : l2) {
    code_bytes.push_back(models.quantizer(f).pq.n());
    dims.push_back(models.quantizer(f).input_dim());
  }
  for (const auto& d : docs) {
    for (std::size_t f = 0; f < l2.size(); ++f) {
      if (const auto* v = d.features.embedding(l2[f])) {
        if (v->size() != dims[f]) {
          throw_error(ErrorCode::kDimMismatch,
                      "doc " + std::to_string(d.image_id) + " family " + l2[f] + " has dim " +
                          std::to_string(v->size()) + ", expected " + std::to_string(dims[f]));
        }
      }
    }
  }

  Index index;
  index.models_ = std::move(models);
  const IndexModels& m = index.models_;

  // Encode every document.
  std::vector<ShardBuilder::Entry> entries(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) {
    const ImageDoc& d = docs[i];
    ShardBuilder::Entry& e = entries[i];
    e.meta.image_id = d.image_id;
    e.meta.source_uri = d.source_uri;
    e.meta.metadata_text = d.metadata_text;
    e.meta.category = d.category ? d.category : d.features.category;
    e.meta.phash = d.features.phash;
    e.meta.digest = d.features.digest;
    e.meta.dominant_color = d.features.dominant_color;
    e.codes.resize(l2.size());
    e.raw.assign(l2.size(), nullptr);
    for (std::size_t f = 0; f < l2.size(); ++f) {
      const auto* v = d.features.embedding(l2[f]);
      if (v == nullptr) continue;
      const FamilyQuantizer& q = m.quantizer(l2[f]);
      const auto reduced = q.reduce(*v);
      e.codes[f] = quantize::pq_encode(q.pq, reduced);
      if (l2[f] == l1) e.words = m.words_for(reduced);
      if (config.store_raw) e.raw[f] = v;
    }
  });

  std::vector<ShardBuilder> builders;
  for (std::uint32_t s = 0; s < config.shards; ++s) {
    builders.emplace_back(s, l2, code_bytes,
                          config.store_raw ? l2 : std::vector<std::string>{},
                          config.store_raw ? dims : std::vector<std::size_t>{});
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    builders[shard_assign(docs[i].image_id, config.shards)].add(std::move(entries[i]));
  }
  entries.clear();
  for (auto& b : builders) index.shards_.push_back(b.finish());

  for (const auto& d : docs) index.text_stats_.add_document(d.metadata_text);

  std::vector<rank::FamilyScale> scales;
  for (std::size_t f = 0; f < l2.size(); ++f) {
    scales.push_back({l2[f], family_scale(docs, l2[f], config.scale_pairs, config.seed + f)});
  }
  index.registry_ = rank::FeatureRegistry(std::move(scales));

  IndexManifest& man = index.manifest_;
  man.shards = config.shards;
  man.doc_count = docs.size();
  man.l1_family = l1;
  for (std::size_t f = 0; f < l2.size(); ++f) {
    man.families.push_back(
        {l2[f], dims[f], l2[f] == l1 ? "L1" : "L2", code_bytes[f], config.store_raw});
  }
  man.registry = index.registry_.to_json();
  man.model_digests = index.models_.digests();
  man.text_stats_digest = md5(index.text_stats_.serialize()).hex();
  man.build_timestamp = utc_timestamp();
  for (const auto& s : index.shards_) {
    man.shard_manifests.push_back({s.id(), s.doc_count(), s.posting_count(), {}});
  }
  spdlog::info("built index: {} docs in {} shards, {} families", docs.size(), config.shards,
               l2.size());
  return index;
}

IndexManifest Index::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  IndexManifest man = manifest_;
  man.model_digests = models_.save(dir / kModelsDir);
  const auto text = text_stats_.serialize();
  write_file_bytes(dir / kTextStatsFile, text);
  man.text_stats_digest = md5(text).hex();
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    auto& sm = man.shard_manifests[i];
    sm.files.clear();
    for (const auto& [suffix, bytes] : shards_[i].serialize()) {
      const std::string name = shard_file(shards_[i].id(), suffix);
      write_file_bytes(dir / name, bytes);
      sm.files[name] = entry_for(bytes);
    }
  }
  const auto tmp = dir / (std::string(kManifestFile) + ".tmp");
  write_file_text(tmp, man.to_json().dump(2) + "\n");
  std::filesystem::rename(tmp, dir / kManifestFile);
  return man;
}

Index Index::load(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  require(std::filesystem::exists(manifest_path), ErrorCode::kLoad,
          "no index manifest at " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::kLoad, manifest_path.string() + ": " + e.what());
  }
  Index index;
  index.manifest_ = IndexManifest::from_json(j);
  const IndexManifest& man = index.manifest_;

  for (const auto& [file, digest] : man.model_digests) {
    const auto path = dir / kModelsDir / file;
    require(std::filesystem::exists(path), ErrorCode::kIntegrity, "missing model file " + file);
    if (md5(read_file_bytes(path)).hex() != digest) {
      throw_error(ErrorCode::kIntegrity, "model file " + file +
                                             " does not match the manifest digest; refusing "
                                             "to load the index with mismatched models");
    }
  }
  std::vector<std::string> families;
  for (const auto& f : man.families) families.push_back(f.name);
  for (const auto& f : families) {
    for (const auto* prefix : {"pca.", "pq."}) {
      require(man.model_digests.contains(prefix + f + ".bin"), ErrorCode::kIntegrity,
              "manifest has no digest for model " + std::string(prefix) + f + ".bin");
    }
  }
  require(man.model_digests.contains("vw.bin"), ErrorCode::kIntegrity,
          "manifest has no digest for vw.bin");
  index.models_ = IndexModels::load(dir / kModelsDir, man.l1_family, families);

  const auto text = read_file_bytes(dir / kTextStatsFile);
  require(md5(text).hex() == man.text_stats_digest, ErrorCode::kIntegrity,
          "text statistics do not match the manifest digest");
  index.text_stats_ = rank::TextStats::deserialize(text);
  index.registry_ = rank::FeatureRegistry::from_json(man.registry);

  std::uint64_t total = 0;
  for (const auto& sm : man.shard_manifests) {
    const std::string context = "shard " + std::to_string(sm.shard_id);
    std::map<std::string, std::vector<std::uint8_t>> files;
    const std::string prefix = "shard_" + std::to_string(sm.shard_id) + ".";
    for (const auto& [name, entry] : sm.files) {
      require(name.starts_with(prefix), ErrorCode::kIntegrity,
              context + ": unexpected file " + name);
      files[name.substr(prefix.size())] = read_verified(dir / name, entry, context);
    }
    Shard shard = Shard::deserialize(sm.shard_id, files);
    require(shard.doc_count() == sm.doc_count, ErrorCode::kIntegrity,
            context + ": doc count differs from the manifest");
    for (std::size_t f = 0; f < man.families.size(); ++f) {
      const auto& info = man.families[f];
      const auto* codes = shard.codes(info.name);
      require(codes != nullptr && codes->bytes_per_code == info.code_bytes,
              ErrorCode::kIntegrity, context + ": PQ codes for " + info.name + " missing");
      const std::size_t k = index.models_.quantizer(info.name).pq.k();
      if (k < 256) {
        for (auto c : codes->codes) {
          require(c < k, ErrorCode::kCorruptCode,
                  context + ": PQ code id " + std::to_string(c) + " outside codebook");
        }
      }
      if (info.raw) {
        const auto* feats = shard.features(info.name);
        require(feats != nullptr && feats->dim == info.dim, ErrorCode::kIntegrity,
                context + ": raw features for " + info.name + " missing");
      }
    }
    total += shard.doc_count();
    index.shards_.push_back(std::move(shard));
  }
  require(total == man.doc_count, ErrorCode::kIntegrity,
          "shard doc counts do not sum to the manifest total");
  spdlog::info("loaded index {}: {} docs in {} shards", dir.string(), total, man.shards);
  return index;
}

std::optional<DocLocation> Index::locate(std::uint64_t image_id) const {
  const std::uint32_t s = shard_assign(image_id, manifest_.shards);
  if (auto ord = shards_[s].ordinal_of(image_id)) return DocLocation{s, *ord};
  return std::nullopt;
}

feature::FeatureBundle Index::stored_bundle(const DocLocation& loc) const {
  const Shard& shard = shards_[loc.shard];
  const DocMeta meta = shard.meta(loc.ordinal);
  feature::FeatureBundle b;
  b.category = meta.category;
  b.phash = meta.phash;
  b.digest = meta.digest;
  b.dominant_color = meta.dominant_color;
  if (!meta.metadata_text.empty()) b.metadata_text = meta.metadata_text;
  for (const auto& info : manifest_.families) {
    const auto* store = shard.features(info.name);
    if (store == nullptr) continue;
    if (const float* v = store->vector(loc.ordinal)) {
      b.embeddings[info.name] = std::vector<float>(v, v + store->dim);
    }
  }
  return b;
}

std::optional<feature::FeatureBundle> Index::stored_bundle(std::uint64_t image_id) const {
  auto loc = locate(image_id);
  if (!loc) return std::nullopt;
  return stored_bundle(*loc);
}

}  // namespace viscade::index
