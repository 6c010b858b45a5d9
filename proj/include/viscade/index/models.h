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

#ifndef VISCADE_INDEX_MODELS_H_
#define VISCADE_INDEX_MODELS_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "viscade/core/kv_config.h"
#include "viscade/feature/pca.h"
#include "viscade/index/doc.h"
#include "viscade/quantize/pq.h"
#include "viscade/quantize/visual_words.h"

namespace viscade::index {

// PCA reduction to 4n dims followed by an n-byte product quantizer.
struct FamilyQuantizer {
  feature::PCAModel pca;
  quantize::PQCodebook pq;

  std::size_t input_dim() const { return pca.input_dim(); }
  std::vector<float> reduce(std::span<const float> v) const {
    return feature::pca_apply(pca, v);
  }
};

struct IndexModels {
  std::string l1_family;
  std::map<std::string, FamilyQuantizer, std::less<>> quantizers;
  quantize::VisualWordCodebook vw;  // over the first vw.dim() reduced L1 dims

  const FamilyQuantizer& quantizer(std::string_view family) const;
  quantize::VisualWordSet words_for(std::span<const float> reduced_l1) const;

  // File name to serialized bytes.
  std::map<std::string, std::vector<std::uint8_t>> files() const;
  std::map<std::string, std::string> digests() const;

  // Files: pca.<family>.bin, pq.<family>.bin, vw.bin. Returns file name to
  // MD5 hex.
  std::map<std::string, std::string> save(const std::filesystem::path& dir) const;
  static IndexModels load(const std::filesystem::path& dir, const std::string& l1_family,
                          const std::vector<std::string>& families);
};

struct IndexBuildConfig {
  std::uint32_t shards = 1;
  std::string l1_family;
  // Families that receive PQ codes and raw storage. Empty means every
  // family present in the documents.
  std::vector<std::string> l2_families;
  std::size_t pq_subspaces = quantize::kPqDefaultSubspaces;
  std::size_t pq_k = quantize::kPqDefaultCentroids;
  std::size_t vw_books = quantize::kVwDefaultBooks;
  std::size_t vw_vocab = quantize::kVwDefaultVocab;
  std::size_t vw_dim = 0;  // 0 picks 64, or the largest multiple of vw_books below
  bool store_raw = true;
  std::uint64_t seed = 0;
  std::size_t max_train_points = 50000;
  std::size_t kmeans_iters = 20;
  std::size_t scale_pairs = 20000;

  // Keys: index.shards, index.store_raw, index.l2_families, pq.subspaces,
  // pq.k, vw.books, vw.vocab, vw.dim, train.seed, train.max_points,
  // train.iters, and l1_family.
  static IndexBuildConfig from_kv(const KvConfig& kv);
};

// Trains the PCA, PQ and visual-word models on the given documents.
IndexModels train_index_models(std::span<const ImageDoc> docs, const IndexBuildConfig& config);

// Stage-wise pieces of train_index_models, for training models one kind at a
// time. Families are trained in training_families order and each gets the
// seed family_seed returns.
std::vector<std::string> training_families(std::span<const ImageDoc> docs,
                                           const IndexBuildConfig& config);
std::uint64_t family_seed(const IndexBuildConfig& config, std::span<const std::string> families,
                          const std::string& family);
feature::PCAModel train_family_pca(std::span<const ImageDoc> docs, const std::string& family,
                                   const IndexBuildConfig& config, std::uint64_t seed);
quantize::PQCodebook train_family_pq(std::span<const ImageDoc> docs, const std::string& family,
                                     const feature::PCAModel& pca,
                                     const IndexBuildConfig& config, std::uint64_t seed);
quantize::VisualWordCodebook train_visual_words(std::span<const ImageDoc> docs,
                                                const feature::PCAModel& l1_pca,
                                                const IndexBuildConfig& config,
                                                std::uint64_t l1_seed);

// Families present in at least one document, sorted.
std::vector<std::string> families_in(std::span<const ImageDoc> docs);

}  // namespace viscade::index

#endif  // VISCADE_INDEX_MODELS_H_
