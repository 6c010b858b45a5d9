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

#ifndef VISCADE_FEATURE_DESCRIPTORS_H_
#define VISCADE_FEATURE_DESCRIPTORS_H_

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "viscade/feature/image.h"

namespace viscade::feature {

inline constexpr std::size_t kColorGrid = 4;
inline constexpr std::size_t kColorBins = 12;
inline constexpr std::size_t kColorHistDim = kColorGrid * kColorGrid * kColorBins;
inline constexpr std::size_t kLayoutSide = 8;
inline constexpr std::size_t kLayoutDim = kLayoutSide * kLayoutSide;

// Bin of one RGB pixel: 0..7 are 45-degree hue sectors centred on red,
// 8..11 are achromatic value levels (low saturation or dark pixels).
std::size_t color_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// 4x4 spatial grid x 12 colour bins, L1-normalized over the whole image.
std::vector<float> color_histogram(const RawImage& image);

struct DominantColor {
  std::array<float, 3> rgb{};
  float weight = 0.0f;  // fraction of pixels in the winning cluster

  friend bool operator==(const DominantColor&, const DominantColor&) = default;
};

// Heaviest of (up to) three k-means clusters over pixel RGB.
DominantColor dominant_color(const RawImage& image);

// Area-averaged grayscale thumbnail (luma 0.299/0.587/0.114).
std::vector<double> gray_thumbnail(const RawImage& image, std::size_t out_w,
                                   std::size_t out_h);

// 8x8 mean-removed, L2-normalized grayscale layout descriptor.
std::vector<float> layout_descriptor(const RawImage& image);

// 64-bit DCT hash: 32x32 grayscale thumbnail, orthonormal 2-D DCT-II, and
// bit (8*row + col) set when that low-frequency coefficient exceeds the
// median of the 8x8 block.
std::uint64_t perceptual_hash(const RawImage& image);

inline int hamming_distance(std::uint64_t a, std::uint64_t b) {
  return std::popcount(a ^ b);
}

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_DESCRIPTORS_H_
