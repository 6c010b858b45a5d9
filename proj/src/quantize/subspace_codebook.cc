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

#include "viscade/quantize/subspace_codebook.h"

#include <algorithm>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"
#include "viscade/core/thread_pool.h"

namespace viscade::quantize {

SubspaceCodebooks::SubspaceCodebooks(std::size_t books, std::size_t k,
                                     std::size_t sub_dim,
                                     std::vector<float> centroids)
    : books_(books), k_(k), sub_dim_(sub_dim), centroids_(std::move(centroids)) {
  require(centroids_.size() == books_ * k_ * sub_dim_, ErrorCode::kDimMismatch,
          "codebook centroid buffer has wrong size");
  build_transposed();
}

void SubspaceCodebooks::build_transposed() {
  transposed_.assign(centroids_.size(), 0.0f);
  for (std::size_t b = 0; b < books_; ++b) {
    for (std::size_t c = 0; c < k_; ++c) {
      for (std::size_t j = 0; j < sub_dim_; ++j) {
        transposed_[(b * sub_dim_ + j) * k_ + c] =
            centroids_[(b * k_ + c) * sub_dim_ + j];
      }
    }
  }
}

void SubspaceCodebooks::distances(std::size_t book, std::span<const float> sub,
                                  std::span<float> out) const {
  float* d = out.data();
  std::fill_n(d, k_, 0.0f);
  const float* base = transposed_.data() + book * sub_dim_ * k_;
  for (std::size_t j = 0; j < sub_dim_; ++j) {
    const float x = sub[j];
    const float* col = base + j * k_;
    for (std::size_t c = 0; c < k_; ++c) {
      const float diff = x - col[c];
      d[c] += diff * diff;
    }
  }
}

std::uint32_t SubspaceCodebooks::nearest(std::size_t book,
                                         std::span<const float> sub,
                                         std::span<float> scratch) const {
  distances(book, sub, scratch);
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < k_; ++c) {
    if (scratch[c] < scratch[best]) best = c;
  }
  return best;
}

std::vector<std::uint8_t> SubspaceCodebooks::serialize(std::string_view magic) const {
  ByteWriter w;
  w.put_magic(magic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(books_));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(k_));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sub_dim_));
  w.put_array<float>(centroids_);
  return w.release();
}

SubspaceCodebooks SubspaceCodebooks::deserialize(std::span<const std::uint8_t> bytes,
                                                 std::string_view magic) {
  ByteReader r(bytes, ErrorCode::kLoad, std::string(magic) + " codebook");
  r.expect_magic(magic);
  const std::size_t books = r.get<std::uint32_t>();
  const std::size_t k = r.get<std::uint32_t>();
  const std::size_t sub_dim = r.get<std::uint32_t>();
  if (books == 0 || k == 0 || sub_dim == 0) r.fail("zero-sized codebook");
  if (r.remaining() != books * k * sub_dim * sizeof(float)) {
    r.fail("centroid payload size does not match header");
  }
  std::vector<float> centroids(books * k * sub_dim);
  r.get_array<float>(centroids);
  return SubspaceCodebooks(books, k, sub_dim, std::move(centroids));
}

SubspaceCodebooks train_subspace_codebooks(const Matrix& vectors,
                                           std::size_t books, std::size_t k,
                                           const KMeansConfig& config) {
  require(books > 0, ErrorCode::kConfig, "codebook count must be positive");
  require(vectors.cols % books == 0, ErrorCode::kConfig,
          "vector dim " + std::to_string(vectors.cols) +
              " is not divisible by codebook count " + std::to_string(books));
  const std::size_t sub_dim = vectors.cols / books;
  std::vector<Matrix> trained(books);
  parallel_for(books, [&](std::size_t b) {
    Matrix slice(vectors.rows, sub_dim);
    for (std::size_t i = 0; i < vectors.rows; ++i) {
      auto src = vectors.row(i).subspan(b * sub_dim, sub_dim);
      std::copy(src.begin(), src.end(), slice.row(i).begin());
    }
    KMeansConfig cfg = config;
    cfg.k = k;
    cfg.seed = config.seed + b;
    trained[b] = kmeans(slice, cfg).centroids;
  });
  std::vector<float> centroids(books * k * sub_dim, 0.0f);
  for (std::size_t b = 0; b < books; ++b) {
    // A reduced k (too few distinct points) leaves the tail centroids as
    // copies of the last trained one; they are never the strict argmin.
    const auto& m = trained[b];
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t src = std::min(c, m.rows - 1);
      std::copy_n(m.row(src).data(), sub_dim,
                  centroids.data() + (b * k + c) * sub_dim);
    }
  }
  return SubspaceCodebooks(books, k, sub_dim, std::move(centroids));
}

}  // namespace viscade::quantize
