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

#ifndef VISCADE_QUANTIZE_KMEANS_H_
#define VISCADE_QUANTIZE_KMEANS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "viscade/core/matrix.h"

namespace viscade::quantize {

struct KMeansConfig {
  std::size_t k = 1;
  std::size_t max_iters = 25;
  std::uint64_t seed = 0;
  std::size_t restarts = 1;
  // Stop when the relative distortion drop of one Lloyd step falls below this.
  double tolerance = 1e-4;
  // Uniform subsample of the input used for training; 0 keeps every point.
  std::size_t max_train_points = 0;
};

struct KMeansResult {
  Matrix centroids;  // effective_k x dim
  // Mean squared distance of each (training) point to its nearest centroid.
  double distortion = 0.0;
  // Distortion after every assignment step of the winning restart.
  std::vector<double> history;
  std::size_t effective_k = 0;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` by distortion.
// When fewer than k distinct points exist, k is reduced (with a warning).
// Empty clusters are re-seeded from the point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, const KMeansConfig& config);

// Index of the nearest row of `centroids` to `x`; ties go to the lowest index.
std::size_t nearest_row(const Matrix& centroids, std::span<const float> x);

}  // namespace viscade::quantize

#endif  // VISCADE_QUANTIZE_KMEANS_H_
