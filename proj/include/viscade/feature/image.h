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

#ifndef VISCADE_FEATURE_IMAGE_H_
#define VISCADE_FEATURE_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace viscade::feature {

// 8-bit interleaved RGB image.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // height x width x 3

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h);

  const std::uint8_t* at(std::size_t x, std::size_t y) const {
    return pixels.data() + (y * width + x) * 3;
  }
  std::uint8_t* at(std::size_t x, std::size_t y) {
    return pixels.data() + (y * width + x) * 3;
  }
  void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void fill_rect(std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1,
                 std::uint8_t r, std::uint8_t g, std::uint8_t b);

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

// Decodes PNG, JPEG or binary PPM (P6) bytes. Throws kDecode otherwise.
RawImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ppm(const RawImage& image);
std::vector<std::uint8_t> encode_png(const RawImage& image);

// Canonical byte form used when an image arrives already decoded: u32 width,
// u32 height, then the pixel bytes.
std::vector<std::uint8_t> canonical_bytes(const RawImage& image);

// Normalized crop box; coordinates are clamped into [0, 1] before use.
struct CropRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  CropRect clamped() const;
  friend bool operator==(const CropRect&, const CropRect&) = default;
};

inline constexpr std::size_t kMinCropPixels = 8;

struct PixelRect {
  std::size_t x0, y0, x1, y1;  // half-open
};

// Pixel bounds of the clamped crop. Throws kInvalidCrop when the box is
// empty or smaller than 8x8 pixels.
PixelRect crop_pixels(const CropRect& crop, std::size_t width, std::size_t height);
RawImage apply_crop(const RawImage& image, const CropRect& crop);

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_IMAGE_H_
