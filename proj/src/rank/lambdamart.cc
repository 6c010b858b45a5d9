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

#include "viscade/rank/lambdamart.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"
#include "viscade/rank/ndcg.h"

namespace viscade::rank {
namespace {

constexpr std::size_t kTrainNdcgCutoff = 5;
constexpr double kHessianEpsilon = 1e-9;

double gain(int grade) { return std::exp2(grade) - 1.0; }
double discount(std::size_t pos) { return 1.0 / std::log2(static_cast<double>(pos) + 2.0); }

std::vector<std::size_t> rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// LambdaRank gradients (ascent direction) and Newton weights for one query.
void query_lambdas(std::span<const int> labels, std::span<const double> scores,
                   double sigma, std::span<double> lambda, std::span<double> hess) {
  const std::size_t n = labels.size();
  std::vector<int> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg_at_k(ideal, n);
  if (idcg <= 0.0) return;
  const auto order = rank_order(scores);
  std::vector<std::size_t> pos(n);
  for (std::size_t r = 0; r < n; ++r) pos[order[r]] = r;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[i] <= labels[j]) continue;
      const double delta = std::abs((gain(labels[i]) - gain(labels[j])) *
                                    (discount(pos[i]) - discount(pos[j]))) /
                           idcg;
      const double rho = 1.0 / (1.0 + std::exp(sigma * (scores[i] - scores[j])));
      const double l = sigma * rho * delta;
      const double h = sigma * sigma * rho * (1.0 - rho) * delta;
      lambda[i] += l;
      lambda[j] -= l;
      hess[i] += h;
      hess[j] += h;
    }
  }
}

struct Split {
  double gain = 0.0;
  int feature = -1;
  float threshold = 0.0f;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& rows, const std::vector<std::vector<std::uint32_t>>& sorted,
              std::size_t min_leaf)
      : rows_(rows), sorted_(sorted), min_leaf_(min_leaf) {}

  RegressionTree build(std::span<const double> grad, std::span<const double> hess,
                       const std::vector<char>& active, std::size_t max_leaves) {
    const std::size_t n = rows_.rows;
    leaf_of_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) leaf_of_[i] = 0;
    }
    RegressionTree tree;
    tree.nodes.push_back({});
    std::vector<int> leaves = {0};
    std::vector<Split> best = {find_split(0, grad)};
    while (leaves.size() < max_leaves) {
      std::size_t pick = leaves.size();
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        if (best[l].feature >= 0 &&
            (pick == leaves.size() || best[l].gain > best[pick].gain)) {
          pick = l;
        }
      }
      if (pick == leaves.size()) break;
      const int node = leaves[pick];
      const Split s = best[pick];
      const int left = static_cast<int>(tree.nodes.size());
      const int right = left + 1;
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      TreeNode& parent = tree.nodes[node];
      parent.feature = s.feature;
      parent.threshold = s.threshold;
      parent.left = left;
      parent.right = right;
      for (std::size_t i = 0; i < n; ++i) {
        if (leaf_of_[i] != node) continue;
        leaf_of_[i] = rows_(i, s.feature) <= s.threshold ? left : right;
      }
      leaves[pick] = left;
      best[pick] = find_split(left, grad);
      leaves.push_back(right);
      best.push_back(find_split(right, grad));
    }
    // Newton leaf values.
    std::vector<double> g(tree.nodes.size(), 0.0), h(tree.nodes.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (leaf_of_[i] < 0) continue;
      g[leaf_of_[i]] += grad[i];
      h[leaf_of_[i]] += hess[i];
    }
    for (int leaf : leaves) tree.nodes[leaf].value = g[leaf] / (h[leaf] + kHessianEpsilon);
    return tree;
  }

  const std::vector<int>& leaf_of() const { return leaf_of_; }

 private:
  Split find_split(int node, std::span<const double> grad) const {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows_.rows; ++i) {
      if (leaf_of_[i] == node) {
        total += grad[i];
        ++count;
      }
    }
    Split best;
    if (count < 2 * min_leaf_) return best;
    const double parent = total * total / static_cast<double>(count);
    for (std::size_t f = 0; f < rows_.cols; ++f) {
      double left_sum = 0.0;
      std::size_t left_count = 0;
      const std::uint32_t* prev = nullptr;
      for (const std::uint32_t& i : sorted_[f]) {
        if (leaf_of_[i] != node) continue;
        if (prev != nullptr) {
          const float a = rows_(*prev, f), b = rows_(i, f);
          const std::size_t right_count = count - left_count;
          if (a < b && left_count >= min_leaf_ && right_count >= min_leaf_) {
            const double right_sum = total - left_sum;
            const double g = left_sum * left_sum / double(left_count) +
                             right_sum * right_sum / double(right_count) - parent;
            if (g > best.gain + 1e-12) {
              float mid = static_cast<float>(0.5 * (double(a) + double(b)));
              if (!(mid >= a && mid < b)) mid = a;
              best = {g, static_cast<int>(f), mid};
            }
          }
        }
        left_sum += grad[i];
        ++left_count;
        prev = &i;
      }
    }
    return best;
  }

  const Matrix& rows_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  std::size_t min_leaf_;
  std::vector<int> leaf_of_;
};

}  // namespace

double RegressionTree::predict(std::span<const float> row) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const TreeNode& n = nodes[node];
    node = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[node].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

double model_score(const RankingModel& model, std::span<const float> row) {
  check_dim(row.size(), model.arity(), "ranking model row");
  double score = 0.0;
  for (const auto& tree : model.trees) score += model.learning_rate * tree.predict(row);
  return score;
}

void RankingDataset::add_query(const Matrix& query_rows, std::span<const int> query_labels) {
  require(query_rows.rows == query_labels.size(), ErrorCode::kConfig,
          "query has " + std::to_string(query_rows.rows) + " rows but " +
              std::to_string(query_labels.size()) + " labels");
  for (std::size_t i = 0; i < query_rows.rows; ++i) rows.append_row(query_rows.row(i));
  labels.insert(labels.end(), query_labels.begin(), query_labels.end());
  offsets.push_back(rows.rows);
}

double mean_ndcg(const RankingDataset& data, std::span<const double> scores, std::size_t k) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t q = 0; q < data.queries(); ++q) {
    const std::size_t b = data.offsets[q], e = data.offsets[q + 1];
    if (b == e) continue;
    const auto order = rank_order(scores.subspan(b, e - b));
    std::vector<int> ranked;
    for (auto i : order) ranked.push_back(data.labels[b + i]);
    total += ndcg_at_k(ranked, std::span(data.labels).subspan(b, e - b), k);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

LambdaMartResult lambdamart_train(const RankingDataset& data, const LambdaMartConfig& config,
                                  std::vector<std::string> feature_names,
                                  std::string registry_digest) {
  require(config.trees >= 1, ErrorCode::kConfig, "LambdaMART needs at least one tree");
  require(config.leaves >= 1, ErrorCode::kConfig, "LambdaMART needs leaves >= 1");
  require(config.min_leaf >= 1, ErrorCode::kConfig, "LambdaMART needs min_leaf >= 1");
  require(config.learning_rate > 0.0, ErrorCode::kConfig, "learning rate must be > 0");
  require(config.row_subsample > 0.0 && config.row_subsample <= 1.0, ErrorCode::kConfig,
          "row_subsample must be in (0, 1]");
  require(data.labels.size() == data.rows.rows, ErrorCode::kConfig,
          "labels are not aligned with rows");
  require(data.offsets.back() == data.rows.rows, ErrorCode::kConfig,
          "query offsets do not cover the rows");
  bool any_pair = false, any_variation = false;
  for (std::size_t q = 0; q < data.queries(); ++q) {
    const std::size_t b = data.offsets[q], e = data.offsets[q + 1];
    if (e - b >= 2) any_pair = true;
    for (std::size_t i = b + 1; i < e; ++i) {
      if (data.labels[i] != data.labels[b]) any_variation = true;
    }
  }
  require(any_pair, ErrorCode::kConfig, "LambdaMART needs a query with at least 2 docs");
  require(any_variation, ErrorCode::kDegenerateTraining,
          "all labels are identical within every query; nothing to learn");

  const std::size_t n = data.rows.rows;
  const std::size_t f = data.rows.cols;
  if (feature_names.empty()) {
    for (std::size_t i = 0; i < f; ++i) feature_names.push_back("f" + std::to_string(i));
  }
  check_dim(feature_names.size(), f, "feature names");

  std::vector<std::vector<std::uint32_t>> sorted(f);
  for (std::size_t j = 0; j < f; ++j) {
    sorted[j].resize(n);
    std::iota(sorted[j].begin(), sorted[j].end(), 0u);
    std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](std::uint32_t a, std::uint32_t b) {
      return data.rows(a, j) < data.rows(b, j);
    });
  }

  LambdaMartResult result;
  result.model.learning_rate = config.learning_rate;
  result.model.feature_names = std::move(feature_names);
  result.model.registry_digest = std::move(registry_digest);

  std::vector<double> scores(n, 0.0), grad(n), hess(n);
  std::vector<char> active(n, 1);
  TreeBuilder builder(data.rows, sorted, config.min_leaf);
  for (std::size_t t = 0; t < config.trees; ++t) {
    if (config.row_subsample < 1.0) {
      std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ULL + t);
      std::bernoulli_distribution keep(config.row_subsample);
      for (std::size_t q = 0; q < data.queries(); ++q) {
        const char k = keep(rng) ? 1 : 0;
        for (std::size_t i = data.offsets[q]; i < data.offsets[q + 1]; ++i) active[i] = k;
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t q = 0; q < data.queries(); ++q) {
      const std::size_t b = data.offsets[q], e = data.offsets[q + 1];
      if (e - b < 2 || !active[b]) continue;
      query_lambdas(std::span(data.labels).subspan(b, e - b),
                    std::span<const double>(scores).subspan(b, e - b), config.sigma,
                    std::span(grad).subspan(b, e - b), std::span(hess).subspan(b, e - b));
    }
    RegressionTree tree = builder.build(grad, hess, active, config.leaves);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] += config.learning_rate * tree.predict(data.rows.row(i));
    }
    result.model.trees.push_back(std::move(tree));
    result.train_ndcg.push_back(mean_ndcg(data, scores, kTrainNdcgCutoff));
  }
  spdlog::debug("lambdamart: {} trees, train NDCG@5 {:.4f}", config.trees,
                result.train_ndcg.back());
  return result;
}

nlohmann::json RankingModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& tree : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      if (n.feature < 0) {
        nodes.push_back({{"value", n.value}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
      }
    }
    trees_json.push_back({{"nodes", nodes}});
  }
  return {{"format", "viscade-lambdamart-1"},
          {"learning_rate", learning_rate},
          {"feature_names", feature_names},
          {"registry_digest", registry_digest},
          {"trees", trees_json}};
}

RankingModel RankingModel::from_json(const nlohmann::json& j) {
  RankingModel m;
  try {
    require(j.at("format").get<std::string>() == "viscade-lambdamart-1", ErrorCode::kLoad,
            "unsupported ranking model format");
    m.learning_rate = j.at("learning_rate").get<double>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.registry_digest = j.value("registry_digest", "");
    for (const auto& tj : j.at("trees")) {
      RegressionTree tree;
      for (const auto& nj : tj.at("nodes")) {
        TreeNode node;
        if (nj.contains("feature")) {
          node.feature = nj.at("feature").get<int>();
          node.threshold = nj.at("threshold").get<float>();
          node.left = nj.at("left").get<int>();
          node.right = nj.at("right").get<int>();
        } else {
          node.value = nj.at("value").get<double>();
        }
        tree.nodes.push_back(node);
      }
      m.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::kLoad, std::string("malformed ranking model: ") + e.what());
  }
  require(!m.trees.empty(), ErrorCode::kLoad, "ranking model has no trees");
  const int arity = static_cast<int>(m.arity());
  for (const auto& tree : m.trees) {
    const int size = static_cast<int>(tree.nodes.size());
    require(size >= 1, ErrorCode::kLoad, "ranking model has an empty tree");
    for (int i = 0; i < size; ++i) {
      const TreeNode& n = tree.nodes[i];
      if (n.feature < 0) continue;
      require(n.feature < arity, ErrorCode::kLoad,
              "tree references feature " + std::to_string(n.feature) + " beyond arity " +
                  std::to_string(arity));
      require(n.left > i && n.left < size && n.right > i && n.right < size, ErrorCode::kLoad,
              "tree has invalid child links");
    }
  }
  return m;
}

void RankingModel::save(const std::filesystem::path& path) const {
  write_file_text(path, to_json().dump(1));
}

RankingModel RankingModel::load(const std::filesystem::path& path) {
  const std::string text = read_file_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::kLoad, path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace viscade::rank
