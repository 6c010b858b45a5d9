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

#ifndef VISCADE_RANK_LAMBDAMART_H_
#define VISCADE_RANK_LAMBDAMART_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "viscade/core/matrix.h"

namespace viscade::rank {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;  // go left when value <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const float> row) const;
  std::size_t leaf_count() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct RankingModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  std::vector<std::string> feature_names;
  std::string registry_digest;  // hex; empty when not tied to a registry

  std::size_t arity() const { return feature_names.size(); }

  nlohmann::json to_json() const;
  static RankingModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static RankingModel load(const std::filesystem::path& path);

  friend bool operator==(const RankingModel&, const RankingModel&) = default;
};

// Sum over trees of learning_rate * leaf value. Throws kDimMismatch.
double model_score(const RankingModel& model, std::span<const float> row);

// Rows grouped by query: rows of query q are [offsets[q], offsets[q+1]).
struct RankingDataset {
  Matrix rows;
  std::vector<int> labels;
  std::vector<std::size_t> offsets = {0};

  std::size_t queries() const { return offsets.size() - 1; }
  void add_query(const Matrix& query_rows, std::span<const int> query_labels);
};

struct LambdaMartConfig {
  std::size_t trees = 100;
  std::size_t leaves = 8;
  double learning_rate = 0.1;
  std::size_t min_leaf = 5;
  std::uint64_t seed = 0;
  double row_subsample = 1.0;  // fraction of queries sampled per tree
  double sigma = 1.0;
};

struct LambdaMartResult {
  RankingModel model;
  std::vector<double> train_ndcg;  // mean NDCG@5 after each tree
};

LambdaMartResult lambdamart_train(const RankingDataset& data, const LambdaMartConfig& config,
                                  std::vector<std::string> feature_names = {},
                                  std::string registry_digest = {});

// Mean NDCG@k over queries, ranking each query's rows by `scores` (desc,
// ties broken by row order).
double mean_ndcg(const RankingDataset& data, std::span<const double> scores, std::size_t k);

}  // namespace viscade::rank

#endif  // VISCADE_RANK_LAMBDAMART_H_
