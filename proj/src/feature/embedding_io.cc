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

#include "viscade/feature/embedding_io.h"

#include <spdlog/spdlog.h>

#include <cmath>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::feature {

EmbeddingTable::EmbeddingTable(std::string family, std::size_t dim)
    : family_(std::move(family)), vectors_(0, dim) {}

void EmbeddingTable::add(std::uint64_t id, std::span<const float> vector) {
  check_dim(vector.size(), vectors_.cols, ("embedding " + family_).c_str());
  if (!index_.emplace(id, ids_.size()).second) {
    throw_error(ErrorCode::kLoad, "embedding family " + family_ +
                                      ": duplicate image id " + std::to_string(id));
  }
  ids_.push_back(id);
  vectors_.append_row(vector);
}

const float* EmbeddingTable::find(std::uint64_t id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : vectors_.row(it->second).data();
}

std::optional<std::vector<float>> EmbeddingTable::get(std::uint64_t id) const {
  const float* p = find(id);
  if (p == nullptr) return std::nullopt;
  return std::vector<float>(p, p + dim());
}

EmbeddingTable parse_embeddings(std::span<const std::uint8_t> bytes,
                                const std::string& family,
                                std::optional<std::size_t> expected_dim) {
  ByteReader r(bytes, ErrorCode::kLoad, "embedding file for " + family);
  r.expect_magic("EMB1");
  const std::size_t dim = r.get<std::uint32_t>();
  const std::uint64_t count = r.get<std::uint64_t>();
  if (dim == 0) r.fail("declared dim is 0");
  if (expected_dim && *expected_dim != dim) {
    throw_error(ErrorCode::kLoad, "embedding file for " + family + " declares dim " +
                                      std::to_string(dim) + ", family expects " +
                                      std::to_string(*expected_dim));
  }
  const std::size_t record_size = 8 + dim * sizeof(float);
  if (r.remaining() != count * record_size) {
    const std::uint64_t complete = r.remaining() / record_size;
    throw_error(ErrorCode::kLoad,
                "embedding file for " + family + ": header declares " +
                    std::to_string(count) + " records but payload holds " +
                    std::to_string(r.remaining()) + " bytes (record " +
                    std::to_string(complete) + " is truncated or extra data present)");
  }
  EmbeddingTable table(family, dim);
  std::vector<float> v(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id = r.get<std::uint64_t>();
    r.get_array<float>(v);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!std::isfinite(v[j])) {
        throw_error(ErrorCode::kLoad, "embedding file for " + family + ": record " +
                                          std::to_string(i) + " (id " +
                                          std::to_string(id) +
                                          ") has a non-finite component at " +
                                          std::to_string(j));
      }
    }
    try {
      table.add(id, v);
    } catch (const Error& e) {
      throw_error(ErrorCode::kLoad, std::string(e.what()) + " at record " +
                                        std::to_string(i));
    }
  }
  spdlog::debug("loaded {} embeddings of dim {} for family {}", table.size(), dim,
                family);
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::string& family,
                               std::optional<std::size_t> expected_dim) {
  return parse_embeddings(read_file_bytes(path), family, expected_dim);
}

std::vector<std::uint8_t> serialize_embeddings(const EmbeddingTable& table) {
  ByteWriter w;
  w.put_magic("EMB1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.dim()));
  w.put<std::uint64_t>(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    w.put<std::uint64_t>(table.ids()[i]);
    w.put_array<float>(table.vectors().row(i));
  }
  return w.release();
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  write_file_bytes(path, serialize_embeddings(table));
}

}  // namespace viscade::feature
