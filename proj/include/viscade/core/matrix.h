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

#ifndef VISCADE_CORE_MATRIX_H_
#define VISCADE_CORE_MATRIX_H_

#include <cstddef>
#include <span>
#include <vector>

#include "viscade/core/error.h"

namespace viscade {

// Dense row-major float matrix; the common currency for batches of vectors.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  bool empty() const { return rows == 0; }

  void append_row(std::span<const float> values) {
    if (rows == 0 && cols == 0) cols = values.size();
    require(values.size() == cols, ErrorCode::kDimMismatch,
            "row has dim " + std::to_string(values.size()) + ", expected " +
                std::to_string(cols));
    data.insert(data.end(), values.begin(), values.end());
    ++rows;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline float squared_l2(std::span<const float> a, std::span<const float> b) {
  float acc = 0.0f;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline double squared_l2_f64(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw_error(ErrorCode::kDimMismatch,
                std::string(what) + ": dimension " + std::to_string(got) +
                    " does not match expected " + std::to_string(want));
  }
}

}  // namespace viscade

#endif  // VISCADE_CORE_MATRIX_H_
