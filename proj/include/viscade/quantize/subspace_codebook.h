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

#ifndef VISCADE_QUANTIZE_SUBSPACE_CODEBOOK_H_
#define VISCADE_QUANTIZE_SUBSPACE_CODEBOOK_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "viscade/core/matrix.h"
#include "viscade/quantize/kmeans.h"

namespace viscade::quantize {

// `books` independent codebooks, each with `k` centroids over a contiguous
// `sub_dim`-wide slice of the input vector. Shared by the product quantizer
// and the visual-word quantizer.
class SubspaceCodebooks {
 public:
  SubspaceCodebooks() = default;
  SubspaceCodebooks(std::size_t books, std::size_t k, std::size_t sub_dim,
                    std::vector<float> centroids);

  std::size_t books() const { return books_; }
  std::size_t k() const { return k_; }
  std::size_t sub_dim() const { return sub_dim_; }
  std::size_t dim() const { return books_ * sub_dim_; }
  const std::vector<float>& centroids() const { return centroids_; }

  std::span<const float> centroid(std::size_t book, std::size_t id) const {
    return {centroids_.data() + (book * k_ + id) * sub_dim_, sub_dim_};
  }

  // Nearest centroid of `book` to the sub-vector; lowest id wins ties.
  // `scratch` must hold k floats.
  std::uint32_t nearest(std::size_t book, std::span<const float> sub,
                        std::span<float> scratch) const;

  // out[j] = squared distance from `sub` to centroid j of `book`.
  void distances(std::size_t book, std::span<const float> sub,
                 std::span<float> out) const;

  // File layout: magic, u32 books, u32 k, u32 sub_dim, f32 centroids.
  std::vector<std::uint8_t> serialize(std::string_view magic) const;
  static SubspaceCodebooks deserialize(std::span<const std::uint8_t> bytes,
                                       std::string_view magic);

  friend bool operator==(const SubspaceCodebooks& a, const SubspaceCodebooks& b) {
    return a.books_ == b.books_ && a.k_ == b.k_ && a.sub_dim_ == b.sub_dim_ &&
           a.centroids_ == b.centroids_;
  }

 private:
  void build_transposed();

  std::size_t books_ = 0;
  std::size_t k_ = 0;
  std::size_t sub_dim_ = 0;
  std::vector<float> centroids_;   // books x k x sub_dim
  std::vector<float> transposed_;  // books x sub_dim x k
};

// Independent k-means per contiguous slice. Book b uses seed `config.seed + b`.
SubspaceCodebooks train_subspace_codebooks(const Matrix& vectors,
                                           std::size_t books, std::size_t k,
                                           const KMeansConfig& config);

}  // namespace viscade::quantize

#endif  // VISCADE_QUANTIZE_SUBSPACE_CODEBOOK_H_
