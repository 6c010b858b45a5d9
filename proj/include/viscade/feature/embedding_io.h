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

#ifndef VISCADE_FEATURE_EMBEDDING_IO_H_
#define VISCADE_FEATURE_EMBEDDING_IO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "viscade/core/matrix.h"

namespace viscade::feature {

// Externally computed vectors for one feature family, keyed by image id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::string family, std::size_t dim);

  const std::string& family() const { return family_; }
  std::size_t dim() const { return vectors_.cols; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  const Matrix& vectors() const { return vectors_; }

  // Throws kLoad on a duplicate id, kDimMismatch on a wrong-length vector.
  void add(std::uint64_t id, std::span<const float> vector);
  // nullptr when absent.
  const float* find(std::uint64_t id) const;
  std::optional<std::vector<float>> get(std::uint64_t id) const;

 private:
  std::string family_;
  std::vector<std::uint64_t> ids_;
  Matrix vectors_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// Binary little-endian: "EMB1", u32 dim, u64 count, then per record a u64
// image id followed by dim f32 values.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::string& family,
                               std::optional<std::size_t> expected_dim = std::nullopt);
EmbeddingTable parse_embeddings(std::span<const std::uint8_t> bytes,
                                const std::string& family,
                                std::optional<std::size_t> expected_dim = std::nullopt);
std::vector<std::uint8_t> serialize_embeddings(const EmbeddingTable& table);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_EMBEDDING_IO_H_
