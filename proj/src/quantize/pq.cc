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

#include "viscade/quantize/pq.h"

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::quantize {

PQCodebook::PQCodebook(SubspaceCodebooks books) : books_(std::move(books)) {
  require(books_.sub_dim() == kPqSubDim, ErrorCode::kConfig,
          "PQ sub-vectors must be 4-dimensional");
  require(books_.k() >= 1 && books_.k() <= 256, ErrorCode::kConfig,
          "PQ centroid count must be in [1, 256]");
}

PQCodebook PQCodebook::deserialize(std::span<const std::uint8_t> bytes) {
  return PQCodebook(SubspaceCodebooks::deserialize(bytes, "PQC1"));
}

void PQCodebook::save(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

PQCodebook PQCodebook::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

PQCodebook pq_train(const Matrix& vectors, std::size_t n, std::size_t k,
                    const PqTrainConfig& config) {
  require(n > 0, ErrorCode::kConfig, "pq_train: n must be positive");
  require(k >= 1 && k <= 256, ErrorCode::kConfig, "pq_train: k must be in [1, 256]");
  require(vectors.cols == kPqSubDim * n, ErrorCode::kConfig,
          "pq_train: vectors have dim " + std::to_string(vectors.cols) +
              ", expected 4n = " + std::to_string(kPqSubDim * n));
  require(vectors.rows >= k, ErrorCode::kConfig,
          "pq_train: need at least k = " + std::to_string(k) + " samples, got " +
              std::to_string(vectors.rows));
  KMeansConfig km;
  km.seed = config.seed;
  km.max_iters = config.max_iters;
  km.restarts = config.restarts;
  km.max_train_points = config.max_train_points;
  return PQCodebook(train_subspace_codebooks(vectors, n, k, km));
}

PQCode pq_encode(const PQCodebook& codebook, std::span<const float> vector) {
  check_dim(vector.size(), codebook.source_dim(), "pq_encode");
  PQCode code(codebook.n());
  std::vector<float> scratch(codebook.k());
  for (std::size_t i = 0; i < codebook.n(); ++i) {
    code[i] = static_cast<std::uint8_t>(codebook.books().nearest(
        i, vector.subspan(i * kPqSubDim, kPqSubDim), scratch));
  }
  return code;
}

std::vector<std::uint8_t> pq_encode_batch(const PQCodebook& codebook,
                                          const Matrix& vectors) {
  check_dim(vectors.cols, codebook.source_dim(), "pq_encode_batch");
  const std::size_t n = codebook.n();
  std::vector<std::uint8_t> codes(vectors.rows * n);
  std::vector<float> scratch(codebook.k());
  for (std::size_t r = 0; r < vectors.rows; ++r) {
    auto v = vectors.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      codes[r * n + i] = static_cast<std::uint8_t>(codebook.books().nearest(
          i, v.subspan(i * kPqSubDim, kPqSubDim), scratch));
    }
  }
  return codes;
}

std::vector<float> pq_decode(const PQCodebook& codebook,
                             std::span<const std::uint8_t> code) {
  check_dim(code.size(), codebook.n(), "pq_decode");
  std::vector<float> out(codebook.source_dim());
  for (std::size_t i = 0; i < code.size(); ++i) {
    require(code[i] < codebook.k(), ErrorCode::kCorruptCode,
            "pq_decode: centroid id " + std::to_string(code[i]) +
                " out of range in subspace " + std::to_string(i));
    auto c = codebook.centroid(i, code[i]);
    std::copy(c.begin(), c.end(), out.begin() + i * kPqSubDim);
  }
  return out;
}

DistanceTable pq_distance_table(const PQCodebook& codebook,
                                std::span<const float> query) {
  check_dim(query.size(), codebook.source_dim(), "pq_distance_table");
  DistanceTable t;
  t.n = codebook.n();
  t.k = codebook.k();
  t.table.resize(t.n * t.k);
  for (std::size_t i = 0; i < t.n; ++i) {
    auto sub = query.subspan(i * kPqSubDim, kPqSubDim);
    for (std::size_t j = 0; j < t.k; ++j) {
      t.table[i * t.k + j] =
          static_cast<float>(squared_l2_f64(sub, codebook.centroid(i, j)));
    }
  }
  return t;
}

float pq_adc_distance(const DistanceTable& table,
                      std::span<const std::uint8_t> code) {
  check_dim(code.size(), table.n, "pq_adc_distance");
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (code[i] >= table.k) {
      throw_error(ErrorCode::kCorruptCode,
                  "pq_adc_distance: centroid id " + std::to_string(code[i]) +
                      " >= k = " + std::to_string(table.k) + " in subspace " +
                      std::to_string(i));
    }
  }
  return table.adc_unchecked(code.data());
}

}  // namespace viscade::quantize
