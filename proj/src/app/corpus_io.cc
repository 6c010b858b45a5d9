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

#include "viscade/app/corpus_io.h"

#include <fstream>
#include <map>
#include <unordered_map>

#include "json.hpp"
#include "viscade/core/error.h"
#include "viscade/feature/embedding_io.h"

namespace viscade::app {
namespace {

constexpr const char* kDocsFile = "docs.jsonl";
constexpr const char* kHiddenFile = "hidden.jsonl";

nlohmann::json doc_record(const index::ImageDoc& d) {
  nlohmann::json j = {{"id", d.image_id},
                      {"source_uri", d.source_uri},
                      {"metadata_text", d.metadata_text}};
  const auto& f = d.features;
  if (d.category) j["category"] = *d.category;
  if (f.phash) j["phash"] = to_hex(*f.phash);
  if (f.digest) j["digest"] = f.digest->hex();
  if (f.dominant_color) {
    j["dominant_color"] = {{"rgb", f.dominant_color->rgb}, {"weight", f.dominant_color->weight}};
  }
  return j;
}

index::ImageDoc parse_record(const nlohmann::json& j) {
  index::ImageDoc d;
  d.image_id = j.at("id").get<std::uint64_t>();
  d.source_uri = j.value("source_uri", "");
  d.metadata_text = j.value("metadata_text", "");
  if (!d.metadata_text.empty()) d.features.metadata_text = d.metadata_text;
  if (j.contains("category")) {
    d.category = j["category"].get<std::string>();
    d.features.category = d.category;
  }
  if (j.contains("phash")) {
    d.features.phash = std::stoull(j["phash"].get<std::string>(), nullptr, 16);
  }
  if (j.contains("digest")) d.features.digest = Digest128::from_hex(j["digest"].get<std::string>());
  if (j.contains("dominant_color")) {
    feature::DominantColor c;
    c.rgb = j["dominant_color"].at("rgb").get<std::array<float, 3>>();
    c.weight = j["dominant_color"].value("weight", 0.0f);
    d.features.dominant_color = c;
  }
  return d;
}

}  // namespace

void save_corpus(const std::filesystem::path& dir, std::span<const index::ImageDoc> docs,
                 std::span<const HiddenState> hidden) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / kDocsFile, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + (dir / kDocsFile).string());
  std::map<std::string, feature::EmbeddingTable> tables;
  for (const auto& d : docs) {
    out << doc_record(d).dump() << '\n';
    for (const auto& [name, v] : d.features.embeddings) {
      auto it = tables.find(name);
      if (it == tables.end()) it = tables.emplace(name, feature::EmbeddingTable(name, v.size())).first;
      it->second.add(d.image_id, v);
    }
  }
  require(out.good(), ErrorCode::kIo, "failed writing " + (dir / kDocsFile).string());
  for (const auto& [name, table] : tables) {
    feature::save_embeddings(dir / (name + ".emb"), table);
  }
  if (!hidden.empty()) {
    require(hidden.size() == docs.size(), ErrorCode::kConfig,
            "hidden state count differs from doc count");
    std::ofstream h(dir / kHiddenFile, std::ios::binary);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      nlohmann::json j = {{"id", docs[i].image_id},
                          {"cluster", hidden[i].cluster},
                          {"latent", hidden[i].latent}};
      if (hidden[i].duplicate_of) j["duplicate_of"] = *hidden[i].duplicate_of;
      h << j.dump() << '\n';
    }
  }
}

std::vector<index::ImageDoc> load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / kDocsFile, std::ios::binary);
  require(in.good(), ErrorCode::kLoad, "no " + std::string(kDocsFile) + " in " + dir.string());
  std::vector<index::ImageDoc> docs;
  std::unordered_map<std::uint64_t, std::size_t> pos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      docs.push_back(parse_record(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw_error(ErrorCode::kLoad, (dir / kDocsFile).string() + " line " +
                                        std::to_string(line_no) + ": " + e.what());
    }
    require(pos.emplace(docs.back().image_id, docs.size() - 1).second, ErrorCode::kLoad,
            "duplicate id " + std::to_string(docs.back().image_id) + " in " + kDocsFile);
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".emb") continue;
    const std::string family = entry.path().stem().string();
    const auto table = feature::load_embeddings(entry.path(), family);
    for (std::size_t r = 0; r < table.size(); ++r) {
      auto it = pos.find(table.ids()[r]);
      require(it != pos.end(), ErrorCode::kLoad,
              entry.path().filename().string() + " has a vector for unknown id " +
                  std::to_string(table.ids()[r]));
      const auto row = table.vectors().row(r);
      docs[it->second].features.embeddings[family].assign(row.begin(), row.end());
    }
  }
  return docs;
}

std::vector<HiddenState> load_hidden(const std::filesystem::path& dir) {
  std::vector<HiddenState> out;
  std::ifstream in(dir / kHiddenFile, std::ios::binary);
  if (!in.good()) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    HiddenState h;
    h.cluster = j.at("cluster").get<std::uint32_t>();
    h.latent = j.at("latent").get<std::vector<float>>();
    if (j.contains("duplicate_of")) h.duplicate_of = j["duplicate_of"].get<std::uint64_t>();
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace viscade::app
