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

#ifndef VISCADE_FEATURE_PCA_H_
#define VISCADE_FEATURE_PCA_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "viscade/core/matrix.h"

namespace viscade::feature {

inline constexpr std::size_t kMaxPcaInputDim = 4096;

struct PCAModel {
  std::vector<float> mean;          // d
  Matrix components;                // r x d, orthonormal rows
  std::vector<double> eigenvalues;  // r, non-increasing

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.rows; }

  std::vector<std::uint8_t> serialize() const;
  static PCAModel deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static PCAModel load(const std::filesystem::path& path);

  friend bool operator==(const PCAModel&, const PCAModel&) = default;
};

// Covariance is normalized by the sample count, so the mean squared
// reconstruction error over the training set equals the discarded eigenvalue
// sum. Each component's sign is fixed so its largest-magnitude entry is
// positive.
PCAModel pca_train(const Matrix& vectors, std::size_t target_dim);

std::vector<float> pca_apply(const PCAModel& model, std::span<const float> vector);
Matrix pca_apply_batch(const PCAModel& model, const Matrix& vectors);
std::vector<float> pca_inverse(const PCAModel& model, std::span<const float> reduced);

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_PCA_H_
