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

#ifndef VISCADE_QUANTIZE_VISUAL_WORDS_H_
#define VISCADE_QUANTIZE_VISUAL_WORDS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "viscade/core/matrix.h"
#include "viscade/quantize/kmeans.h"
#include "viscade/quantize/subspace_codebook.h"

namespace viscade::quantize {

inline constexpr std::size_t kVwDefaultBooks = 16;
inline constexpr std::size_t kVwDefaultVocab = 1024;

// Packed inverted-index key: codebook position in the high half, centroid id
// in the low half.
using WordId = std::uint32_t;

constexpr WordId pack_word(std::size_t book, std::size_t id) {
  return static_cast<WordId>(book << 16 | (id & 0xffff));
}
constexpr std::size_t word_book(WordId w) { return w >> 16; }
constexpr std::size_t word_centroid(WordId w) { return w & 0xffff; }

// N coarse codebooks over contiguous slices of the reduced feature; each
// image maps to one word per codebook.
class VisualWordCodebook {
 public:
  VisualWordCodebook() = default;
  explicit VisualWordCodebook(SubspaceCodebooks books);

  std::size_t books() const { return books_.books(); }
  std::size_t vocab() const { return books_.k(); }
  std::size_t sub_dim() const { return books_.sub_dim(); }
  std::size_t dim() const { return books_.dim(); }
  const SubspaceCodebooks& codebooks() const { return books_; }

  std::vector<std::uint8_t> serialize() const { return books_.serialize("VWC1"); }
  static VisualWordCodebook deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static VisualWordCodebook load(const std::filesystem::path& path);

  friend bool operator==(const VisualWordCodebook&, const VisualWordCodebook&) = default;

 private:
  SubspaceCodebooks books_;
};

struct VisualWordSet {
  // ids[i] is the centroid chosen in codebook i.
  std::vector<std::uint16_t> ids;

  std::size_t size() const { return ids.size(); }
  WordId word(std::size_t i) const { return pack_word(i, ids[i]); }

  // One 4-byte little-endian slot per codebook (64 bytes at N = 16).
  std::vector<std::uint8_t> serialize() const;
  static VisualWordSet deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const VisualWordSet&, const VisualWordSet&) = default;
};

struct VwTrainConfig {
  std::uint64_t seed = 0;
  std::size_t max_iters = 20;
  std::size_t restarts = 1;
  std::size_t max_train_points = 50000;
};

VisualWordCodebook vw_train(const Matrix& vectors, std::size_t books,
                            std::size_t vocab, const VwTrainConfig& config = {});
VisualWordSet vw_assign(const VisualWordCodebook& codebook,
                        std::span<const float> vector);

}  // namespace viscade::quantize

#endif  // VISCADE_QUANTIZE_VISUAL_WORDS_H_
