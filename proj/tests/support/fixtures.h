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

#ifndef VISCADE_TESTS_SUPPORT_FIXTURES_H_
#define VISCADE_TESTS_SUPPORT_FIXTURES_H_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "viscade/app/synth.h"
#include "viscade/index/index.h"

namespace viscade::testing {

// Small clustered corpus with an auxiliary family, sized for unit tests.
inline app::CorpusSpec small_spec(std::size_t clusters, std::size_t per_cluster,
                                  std::uint64_t seed = 7) {
  app::CorpusSpec spec;
  spec.clusters = clusters;
  spec.docs_per_cluster = per_cluster;
  spec.dim = 32;
  spec.latent_dim = 8;
  spec.aux_dim = 16;
  spec.seed = seed;
  return spec;
}

inline index::IndexBuildConfig small_build_config(std::uint32_t shards = 1) {
  index::IndexBuildConfig cfg;
  cfg.shards = shards;
  cfg.l1_family = "emb";
  cfg.pq_subspaces = 8;
  cfg.pq_k = 16;
  cfg.vw_books = 4;
  cfg.vw_vocab = 16;
  cfg.vw_dim = 16;
  cfg.kmeans_iters = 10;
  cfg.seed = 3;
  return cfg;
}

inline index::Index build_index(std::span<const index::ImageDoc> docs,
                                const index::IndexBuildConfig& cfg) {
  return index::Index::build(docs, index::train_index_models(docs, cfg), cfg);
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("viscade_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace viscade::testing

#endif  // VISCADE_TESTS_SUPPORT_FIXTURES_H_
