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

#include "viscade/quantize/kmeans.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "viscade/core/error.h"

namespace viscade::quantize {
namespace {

std::size_t count_distinct_rows(const Matrix& points) {
  std::vector<std::size_t> order(points.rows);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    auto ra = points.row(a);
    auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = points.rows == 0 ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    auto a = points.row(order[i - 1]);
    auto b = points.row(order[i]);
    if (!std::equal(a.begin(), a.end(), b.begin())) ++distinct;
  }
  return distinct;
}

Matrix subsample(const Matrix& points, std::size_t max_points, std::uint64_t seed) {
  std::vector<std::size_t> idx(points.rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  for (std::size_t i = 0; i < max_points; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  Matrix out(max_points, points.cols);
  for (std::size_t i = 0; i < max_points; ++i) {
    std::copy_n(points.row(idx[i]).data(), points.cols, out.row(i).data());
  }
  return out;
}

// Centroids stored transposed (dim x k) so distance evaluation vectorizes
// across centroids.
class Assigner {
 public:
  Assigner(const Matrix& centroids)
      : k_(centroids.rows), dim_(centroids.cols), soa_(k_ * dim_), dist_(k_) {
    for (std::size_t c = 0; c < k_; ++c) {
      for (std::size_t j = 0; j < dim_; ++j) soa_[j * k_ + c] = centroids(c, j);
    }
  }

  std::size_t nearest(std::span<const float> x, float* best_dist) {
    std::fill(dist_.begin(), dist_.end(), 0.0f);
    float* d = dist_.data();
    for (std::size_t j = 0; j < dim_; ++j) {
      const float xj = x[j];
      const float* col = soa_.data() + j * k_;
      for (std::size_t c = 0; c < k_; ++c) {
        const float diff = xj - col[c];
        d[c] += diff * diff;
      }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k_; ++c) {
      if (d[c] < d[best]) best = c;
    }
    *best_dist = d[best];
    return best;
  }

 private:
  std::size_t k_;
  std::size_t dim_;
  std::vector<float> soa_;
  std::vector<float> dist_;
};

Matrix plus_plus_init(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.rows;
  Matrix centroids(k, points.cols);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t chosen = first(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points.row(chosen).data(), points.cols, centroids.row(c).data());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i],
                           squared_l2_f64(points.row(i), centroids.row(c)));
      total += min_d2[i];
    }
    if (total <= 0.0) {
      // Remaining points all coincide with chosen centroids; cannot happen
      // once k <= distinct points, kept as a guard.
      chosen = first(rng);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t last_positive = 0;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d2[i] <= 0.0) continue;
      last_positive = i;
      target -= min_d2[i];
      if (target < 0.0) {
        chosen = i;
        found = true;
        break;
      }
    }
    if (!found) chosen = last_positive;
  }
  return centroids;
}

struct RunResult {
  Matrix centroids;
  double distortion;
  std::vector<double> history;
};

RunResult lloyd(const Matrix& points, Matrix centroids, const KMeansConfig& cfg) {
  const std::size_t n = points.rows;
  const std::size_t k = centroids.rows;
  const std::size_t dim = points.cols;
  std::vector<std::uint32_t> assign(n);
  std::vector<float> point_dist(n);

  auto assign_all = [&]() {
    Assigner assigner(centroids);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      float d = 0.0f;
      assign[i] = static_cast<std::uint32_t>(assigner.nearest(points.row(i), &d));
      // Distortion is accumulated in double from the exact residual.
      const double dd = squared_l2_f64(points.row(i), centroids.row(assign[i]));
      point_dist[i] = static_cast<float>(dd);
      total += dd;
    }
    return total / static_cast<double>(n);
  };

  std::vector<double> history;
  double prev = assign_all();
  history.push_back(prev);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = assign[i];
      ++counts[c];
      auto row = points.row(i);
      for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += row[j];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) {
          centroids(c, j) = static_cast<float>(sums[c * dim + j] /
                                               static_cast<double>(counts[c]));
        }
        continue;
      }
      // Empty cluster: move it onto the farthest not-yet-used point.
      std::size_t far = 0;
      float far_d = -1.0f;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && point_dist[i] > far_d) {
          far_d = point_dist[i];
          far = i;
        }
      }
      taken[far] = true;
      point_dist[far] = 0.0f;
      std::copy_n(points.row(far).data(), dim, centroids.row(c).data());
    }
    const double cur = assign_all();
    history.push_back(cur);
    const bool converged = prev - cur <= cfg.tolerance * prev;
    prev = cur;
    if (converged) break;
  }
  return {std::move(centroids), prev, std::move(history)};
}

}  // namespace

KMeansResult kmeans(const Matrix& input, const KMeansConfig& config) {
  require(input.rows > 0, ErrorCode::kConfig, "kmeans: empty input");
  require(config.k >= 1, ErrorCode::kConfig, "kmeans: k must be >= 1");
  require(config.max_iters >= 1, ErrorCode::kConfig,
          "kmeans: max_iters must be >= 1");

  const Matrix* points = &input;
  Matrix sampled;
  if (config.max_train_points > 0 && input.rows > config.max_train_points) {
    sampled = subsample(input, std::max(config.max_train_points, config.k),
                        config.seed);
    points = &sampled;
  }

  std::size_t k = config.k;
  if (points->rows < k || count_distinct_rows(*points) < k) {
    const std::size_t distinct = count_distinct_rows(*points);
    spdlog::warn("kmeans: only {} distinct points for k={}, reducing k",
                 distinct, k);
    k = distinct;
  }

  KMeansResult best;
  best.distortion = std::numeric_limits<double>::infinity();
  const std::size_t restarts = std::max<std::size_t>(config.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ULL + r);
    auto run = lloyd(*points, plus_plus_init(*points, k, rng), config);
    if (run.distortion < best.distortion) {
      best.centroids = std::move(run.centroids);
      best.distortion = run.distortion;
      best.history = std::move(run.history);
    }
  }
  best.effective_k = k;
  return best;
}

std::size_t nearest_row(const Matrix& centroids, std::span<const float> x) {
  check_dim(x.size(), centroids.cols, "nearest_row");
  std::size_t best = 0;
  float best_d = std::numeric_limits<float>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const float d = squared_l2(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace viscade::quantize
