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

#ifndef VISCADE_QUANTIZE_PQ_H_
#define VISCADE_QUANTIZE_PQ_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "viscade/core/matrix.h"
#include "viscade/quantize/kmeans.h"
#include "viscade/quantize/subspace_codebook.h"

namespace viscade::quantize {

inline constexpr std::size_t kPqSubDim = 4;
inline constexpr std::size_t kPqDefaultSubspaces = 25;
inline constexpr std::size_t kPqDefaultCentroids = 256;

// Product quantizer over 4-dimensional sub-vectors. One byte per sub-vector,
// so k is capped at 256.
class PQCodebook {
 public:
  PQCodebook() = default;
  explicit PQCodebook(SubspaceCodebooks books);

  std::size_t n() const { return books_.books(); }
  std::size_t k() const { return books_.k(); }
  std::size_t sub_dim() const { return books_.sub_dim(); }
  std::size_t source_dim() const { return books_.dim(); }
  const SubspaceCodebooks& books() const { return books_; }

  std::span<const float> centroid(std::size_t subspace, std::size_t id) const {
    return books_.centroid(subspace, id);
  }

  std::vector<std::uint8_t> serialize() const { return books_.serialize("PQC1"); }
  static PQCodebook deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static PQCodebook load(const std::filesystem::path& path);

  friend bool operator==(const PQCodebook&, const PQCodebook&) = default;

 private:
  SubspaceCodebooks books_;
};

using PQCode = std::vector<std::uint8_t>;

// n x k table of squared distances from each query sub-vector to every
// centroid of its subspace.
struct DistanceTable {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<float> table;

  float at(std::size_t i, std::size_t j) const { return table[i * k + j]; }

  // Sum of table[i][code[i]] with no range checks; only for codes validated
  // on load.
  float adc_unchecked(const std::uint8_t* code) const {
    double acc = 0.0;
    const float* t = table.data();
    for (std::size_t i = 0; i < n; ++i, t += k) acc += t[code[i]];
    return static_cast<float>(acc);
  }
};

struct PqTrainConfig {
  std::uint64_t seed = 0;
  std::size_t max_iters = 20;
  std::size_t restarts = 1;
  std::size_t max_train_points = 50000;
};

PQCodebook pq_train(const Matrix& vectors, std::size_t n, std::size_t k,
                    const PqTrainConfig& config = {});
PQCode pq_encode(const PQCodebook& codebook, std::span<const float> vector);
// Row-major rows x n code block.
std::vector<std::uint8_t> pq_encode_batch(const PQCodebook& codebook,
                                          const Matrix& vectors);
std::vector<float> pq_decode(const PQCodebook& codebook,
                             std::span<const std::uint8_t> code);
DistanceTable pq_distance_table(const PQCodebook& codebook,
                                std::span<const float> query);
// Throws kCorruptCode when an id is outside the table.
float pq_adc_distance(const DistanceTable& table, std::span<const std::uint8_t> code);

}  // namespace viscade::quantize

#endif  // VISCADE_QUANTIZE_PQ_H_
