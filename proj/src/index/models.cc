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

#include "viscade/index/models.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::index {
namespace {

Matrix family_matrix(std::span<const ImageDoc> docs, const std::string& family) {
  Matrix m;
  for (const auto& d : docs) {
    if (const auto* v = d.features.embedding(family)) m.append_row(*v);
  }
  return m;
}

Matrix subsample(const Matrix& m, std::size_t max_rows, std::uint64_t seed) {
  if (max_rows == 0 || m.rows <= max_rows) return m;
  std::vector<std::size_t> idx(m.rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  Matrix out(0, m.cols);
  for (auto i : idx) out.append_row(m.row(i));
  return out;
}

std::size_t pick_vw_dim(const IndexBuildConfig& cfg, std::size_t reduced_dim) {
  if (cfg.vw_dim != 0) {
    require(cfg.vw_dim % cfg.vw_books == 0 && cfg.vw_dim <= reduced_dim, ErrorCode::kConfig,
            "vw.dim must be a multiple of vw.books and at most the reduced L1 dim " +
                std::to_string(reduced_dim));
    return cfg.vw_dim;
  }
  constexpr std::size_t kPreferred = 64;
  std::size_t dim = std::min(kPreferred, reduced_dim) / cfg.vw_books * cfg.vw_books;
  require(dim >= cfg.vw_books, ErrorCode::kConfig,
          "reduced L1 dim " + std::to_string(reduced_dim) + " is too small for " +
              std::to_string(cfg.vw_books) + " visual-word books");
  return dim;
}

}  // namespace

const FamilyQuantizer& IndexModels::quantizer(std::string_view family) const {
  auto it = quantizers.find(family);
  if (it == quantizers.end()) {
    throw_error(ErrorCode::kConfig, "no quantizer for family '" + std::string(family) + "'");
  }
  return it->second;
}

quantize::VisualWordSet IndexModels::words_for(std::span<const float> reduced_l1) const {
  require(reduced_l1.size() >= vw.dim(), ErrorCode::kDimMismatch,
          "reduced L1 vector shorter than the visual-word input");
  return quantize::vw_assign(vw, reduced_l1.first(vw.dim()));
}

std::map<std::string, std::vector<std::uint8_t>> IndexModels::files() const {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& [family, q] : quantizers) {
    out["pca." + family + ".bin"] = q.pca.serialize();
    out["pq." + family + ".bin"] = q.pq.serialize();
  }
  out["vw.bin"] = vw.serialize();
  return out;
}

std::map<std::string, std::string> IndexModels::digests() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, bytes] : files()) out[name] = md5(bytes).hex();
  return out;
}

std::map<std::string, std::string> IndexModels::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::string> digests;
  for (const auto& [name, bytes] : files()) {
    write_file_bytes(dir / name, bytes);
    digests[name] = md5(bytes).hex();
  }
  return digests;
}

IndexModels IndexModels::load(const std::filesystem::path& dir, const std::string& l1_family,
                              const std::vector<std::string>& families) {
  IndexModels m;
  m.l1_family = l1_family;
  for (const auto& family : families) {
    FamilyQuantizer q;
    q.pca = feature::PCAModel::load(dir / ("pca." + family + ".bin"));
    q.pq = quantize::PQCodebook::load(dir / ("pq." + family + ".bin"));
    require(q.pq.source_dim() == q.pca.output_dim(), ErrorCode::kLoad,
            "PQ codebook for " + family + " does not match its PCA output dim");
    m.quantizers.emplace(family, std::move(q));
  }
  m.vw = quantize::VisualWordCodebook::load(dir / "vw.bin");
  require(m.quantizers.contains(l1_family), ErrorCode::kLoad,
          "no quantizer stored for L1 family " + l1_family);
  require(m.vw.dim() <= m.quantizer(l1_family).pca.output_dim(), ErrorCode::kLoad,
          "visual-word codebook is wider than the reduced L1 vector");
  return m;
}

IndexBuildConfig IndexBuildConfig::from_kv(const KvConfig& kv) {
  IndexBuildConfig c;
  c.shards = static_cast<std::uint32_t>(kv.get_int("index.shards", c.shards));
  c.store_raw = kv.get_bool("index.store_raw", c.store_raw);
  if (auto fams = kv.get("index.l2_families")) c.l2_families = split_list(*fams);
  c.pq_subspaces = static_cast<std::size_t>(kv.get_int("pq.subspaces", long(c.pq_subspaces)));
  c.pq_k = static_cast<std::size_t>(kv.get_int("pq.k", long(c.pq_k)));
  c.vw_books = static_cast<std::size_t>(kv.get_int("vw.books", long(c.vw_books)));
  c.vw_vocab = static_cast<std::size_t>(kv.get_int("vw.vocab", long(c.vw_vocab)));
  c.vw_dim = static_cast<std::size_t>(kv.get_int("vw.dim", long(c.vw_dim)));
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", long(c.seed)));
  c.max_train_points =
      static_cast<std::size_t>(kv.get_int("train.max_points", long(c.max_train_points)));
  c.kmeans_iters = static_cast<std::size_t>(kv.get_int("train.iters", long(c.kmeans_iters)));
  c.l1_family = kv.get_string("l1_family", "");
  require(c.shards >= 1, ErrorCode::kConfig, "index.shards must be >= 1");
  require(c.pq_subspaces >= 1, ErrorCode::kConfig, "pq.subspaces must be >= 1");
  require(c.vw_books >= 1, ErrorCode::kConfig, "vw.books must be >= 1");
  return c;
}

std::vector<std::string> families_in(std::span<const ImageDoc> docs) {
  std::set<std::string> names;
  for (const auto& d : docs) {
    for (const auto& [name, v] : d.features.embeddings) names.insert(name);
  }
  return {names.begin(), names.end()};
}

std::vector<std::string> training_families(std::span<const ImageDoc> docs,
                                           const IndexBuildConfig& config) {
  require(!config.l1_family.empty(), ErrorCode::kConfig, "no L1 family configured");
  std::vector<std::string> families =
      config.l2_families.empty() ? families_in(docs) : config.l2_families;
  if (std::find(families.begin(), families.end(), config.l1_family) == families.end()) {
    families.push_back(config.l1_family);
  }
  return families;
}

std::uint64_t family_seed(const IndexBuildConfig& config, std::span<const std::string> families,
                          const std::string& family) {
  const auto it = std::find(families.begin(), families.end(), family);
  require(it != families.end(), ErrorCode::kConfig, "family '" + family + "' is not trained");
  return config.seed + 1000 * static_cast<std::uint64_t>(it - families.begin());
}

namespace {

Matrix training_sample(std::span<const ImageDoc> docs, const std::string& family,
                       const IndexBuildConfig& config, std::uint64_t seed) {
  const Matrix all = family_matrix(docs, family);
  require(all.rows > 0, ErrorCode::kConfig,
          "family '" + family + "' has no vectors in the training documents");
  require(all.cols >= quantize::kPqSubDim, ErrorCode::kConfig,
          "family '" + family + "' dim " + std::to_string(all.cols) + " is below " +
              std::to_string(quantize::kPqSubDim));
  return subsample(all, config.max_train_points, seed);
}

}  // namespace

feature::PCAModel train_family_pca(std::span<const ImageDoc> docs, const std::string& family,
                                   const IndexBuildConfig& config, std::uint64_t seed) {
  const Matrix sample = training_sample(docs, family, config, seed);
  const std::size_t n = std::min(config.pq_subspaces, sample.cols / quantize::kPqSubDim);
  return feature::pca_train(sample, n * quantize::kPqSubDim);
}

quantize::PQCodebook train_family_pq(std::span<const ImageDoc> docs, const std::string& family,
                                     const feature::PCAModel& pca,
                                     const IndexBuildConfig& config, std::uint64_t seed) {
  const Matrix reduced = feature::pca_apply_batch(pca, training_sample(docs, family, config, seed));
  return quantize::pq_train(reduced, pca.output_dim() / quantize::kPqSubDim, config.pq_k,
                            {.seed = seed,
                             .max_iters = config.kmeans_iters,
                             .max_train_points = config.max_train_points});
}

quantize::VisualWordCodebook train_visual_words(std::span<const ImageDoc> docs,
                                                const feature::PCAModel& l1_pca,
                                                const IndexBuildConfig& config,
                                                std::uint64_t l1_seed) {
  const Matrix reduced =
      feature::pca_apply_batch(l1_pca, training_sample(docs, config.l1_family, config, l1_seed));
  const std::size_t vw_dim = pick_vw_dim(config, reduced.cols);
  Matrix vw_input(0, vw_dim);
  for (std::size_t i = 0; i < reduced.rows; ++i) vw_input.append_row(reduced.row(i).first(vw_dim));
  auto vw = quantize::vw_train(vw_input, config.vw_books, config.vw_vocab,
                               {.seed = config.seed + 77,
                                .max_iters = config.kmeans_iters,
                                .max_train_points = config.max_train_points});
  spdlog::info("trained visual words: {} books x {} words over {} dims", config.vw_books,
               vw.vocab(), vw_dim);
  return vw;
}

IndexModels train_index_models(std::span<const ImageDoc> docs, const IndexBuildConfig& config) {
  const auto families = training_families(docs, config);
  IndexModels models;
  models.l1_family = config.l1_family;
  for (const auto& family : families) {
    const std::uint64_t seed = family_seed(config, families, family);
    FamilyQuantizer q;
    q.pca = train_family_pca(docs, family, config, seed);
    q.pq = train_family_pq(docs, family, q.pca, config, seed);
    spdlog::info("trained quantizer for {}: {} -> {} dims, {} bytes/code", family,
                 q.pca.input_dim(), q.pca.output_dim(), q.pq.n());
    models.quantizers.emplace(family, std::move(q));
  }
  models.vw = train_visual_words(docs, models.quantizer(config.l1_family).pca, config,
                                 family_seed(config, families, config.l1_family));
  return models;
}

}  // namespace viscade::index
