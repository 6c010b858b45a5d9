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

#include "viscade/quantize/visual_words.h"

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::quantize {

VisualWordCodebook::VisualWordCodebook(SubspaceCodebooks books)
    : books_(std::move(books)) {
  require(books_.k() >= 1 && books_.k() <= 65536, ErrorCode::kConfig,
          "visual-word vocabulary must be in [1, 65536]");
}

VisualWordCodebook VisualWordCodebook::deserialize(std::span<const std::uint8_t> bytes) {
  return VisualWordCodebook(SubspaceCodebooks::deserialize(bytes, "VWC1"));
}

void VisualWordCodebook::save(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

VisualWordCodebook VisualWordCodebook::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

std::vector<std::uint8_t> VisualWordSet::serialize() const {
  ByteWriter w;
  for (std::size_t i = 0; i < ids.size(); ++i) w.put<std::uint32_t>(word(i));
  return w.release();
}

VisualWordSet VisualWordSet::deserialize(std::span<const std::uint8_t> bytes) {
  require(bytes.size() % 4 == 0, ErrorCode::kLoad,
          "visual-word set must be a whole number of 4-byte slots");
  ByteReader r(bytes, ErrorCode::kLoad, "visual-word set");
  VisualWordSet set;
  for (std::size_t i = 0; i < bytes.size() / 4; ++i) {
    const WordId w = r.get<std::uint32_t>();
    if (word_book(w) != i) r.fail("slot " + std::to_string(i) + " has wrong codebook");
    set.ids.push_back(static_cast<std::uint16_t>(word_centroid(w)));
  }
  return set;
}

VisualWordCodebook vw_train(const Matrix& vectors, std::size_t books,
                            std::size_t vocab, const VwTrainConfig& config) {
  require(books > 0 && vectors.cols % books == 0, ErrorCode::kConfig,
          "vw_train: dim " + std::to_string(vectors.cols) +
              " is not divisible by N = " + std::to_string(books));
  require(vocab >= 1 && vocab <= 65536, ErrorCode::kConfig,
          "vw_train: vocab must be in [1, 65536]");
  require(vectors.rows >= vocab, ErrorCode::kConfig,
          "vw_train: need at least vocab = " + std::to_string(vocab) +
              " samples, got " + std::to_string(vectors.rows));
  KMeansConfig km;
  km.seed = config.seed;
  km.max_iters = config.max_iters;
  km.restarts = config.restarts;
  km.max_train_points = config.max_train_points;
  return VisualWordCodebook(train_subspace_codebooks(vectors, books, vocab, km));
}

VisualWordSet vw_assign(const VisualWordCodebook& codebook,
                        std::span<const float> vector) {
  check_dim(vector.size(), codebook.dim(), "vw_assign");
  VisualWordSet set;
  set.ids.resize(codebook.books());
  std::vector<float> scratch(codebook.vocab());
  const std::size_t sd = codebook.sub_dim();
  for (std::size_t b = 0; b < codebook.books(); ++b) {
    set.ids[b] = static_cast<std::uint16_t>(
        codebook.codebooks().nearest(b, vector.subspan(b * sd, sd), scratch));
  }
  return set;
}

}  // namespace viscade::quantize
