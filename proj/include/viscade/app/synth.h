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

#ifndef VISCADE_APP_SYNTH_H_
#define VISCADE_APP_SYNTH_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "viscade/core/kv_config.h"
#include "viscade/core/matrix.h"
#include "viscade/feature/image.h"
#include "viscade/index/doc.h"
#include "viscade/rank/judgments.h"

namespace viscade::app {

// Query ids live far above any corpus id so both sets can share a judgment file.
inline constexpr std::uint64_t kQueryIdBase = 1ULL << 40;

struct CorpusSpec {
  std::size_t clusters = 100;
  std::size_t docs_per_cluster = 100;
  std::size_t dim = 128;
  std::size_t latent_dim = 16;
  double noise_sigma = 0.05;
  double cluster_spread = 0.35;
  std::size_t aux_dim = 0;  // 0 disables the auxiliary family
  double aux_noise = 0.5;
  std::size_t categories = 10;
  double category_flip = 0.1;
  double near_dup_rate = 0.0;
  double exact_dup_rate = 0.0;
  std::size_t keywords_per_cluster = 6;
  std::string family = "emb";
  std::string aux_family = "aux";
  std::uint64_t seed = 0;
  std::uint64_t first_id = 1;

  std::size_t size() const { return clusters * docs_per_cluster; }

  // Keys under synth.*: clusters, docs_per_cluster, dim, latent_dim, noise,
  // spread, aux_dim, aux_noise, categories, category_flip, near_dup_rate,
  // exact_dup_rate, family, aux_family, seed.
  static CorpusSpec from_kv(const KvConfig& kv);
};

// Generation state the retrieval system never sees.
struct HiddenState {
  std::uint32_t cluster = 0;
  std::vector<float> latent;
  std::optional<std::uint64_t> duplicate_of;
};

struct SyntheticCorpus {
  std::vector<index::ImageDoc> docs;
  std::vector<HiddenState> hidden;
};

class SyntheticWorld {
 public:
  explicit SyntheticWorld(CorpusSpec spec);

  const CorpusSpec& spec() const { return spec_; }
  const std::string& category_name(std::size_t c) const { return category_names_[c]; }
  std::uint32_t cluster_category(std::size_t cluster) const { return cluster_category_[cluster]; }

  // Deterministic in (spec.seed, id, cluster).
  index::ImageDoc make_doc(std::uint64_t id, std::uint32_t cluster, HiddenState* hidden) const;

  SyntheticCorpus corpus() const;
  // Fresh samples from the same clusters, ids from kQueryIdBase.
  SyntheticCorpus queries(std::size_t count, std::uint64_t seed) const;

 private:
  std::vector<float> embed(const Matrix& map, std::span<const float> latent, double noise,
                           std::uint64_t stream) const;

  CorpusSpec spec_;
  Matrix centers_;  // clusters x latent_dim
  Matrix map_;      // dim x latent_dim
  Matrix aux_map_;  // aux_dim x latent_dim
  std::vector<std::array<float, 3>> cluster_colors_;
  std::vector<std::uint32_t> cluster_category_;
  std::vector<std::vector<std::string>> keywords_;
  std::vector<std::string> category_names_;
  std::vector<std::string> generic_words_;
};

// Procedural picture whose palette follows the document's dominant color.
feature::RawImage render_image(const index::ImageDoc& doc, std::size_t width,
                               std::size_t height);

struct JudgmentSpec {
  std::size_t pool = 24;
  std::size_t pairs_per_query = 120;
  double label_noise = 0.03;
  double tie_band = 0.01;
  double w_latent = 1.0;
  double w_category = 0.5;
  double w_color = 0.8;
  std::uint64_t seed = 0;
};

// Relevance is a hidden weighted sum of latent similarity, category agreement
// and dominant-color similarity.
double hidden_relevance(const index::ImageDoc& query, const HiddenState& query_hidden,
                        const index::ImageDoc& doc, const HiddenState& doc_hidden,
                        const SyntheticWorld& world, const JudgmentSpec& spec);

struct JudgmentSet {
  std::vector<rank::PairwiseJudgment> judgments;
  std::map<std::uint64_t, std::vector<std::uint64_t>> pools;  // query id -> doc ids
};

JudgmentSet generate_judgments(const SyntheticWorld& world, const SyntheticCorpus& corpus,
                               const SyntheticCorpus& queries, const JudgmentSpec& spec);

}  // namespace viscade::app

#endif  // VISCADE_APP_SYNTH_H_
