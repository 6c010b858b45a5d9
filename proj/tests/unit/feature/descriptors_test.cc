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

#include "viscade/feature/descriptors.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/splitmix.h"

namespace viscade::feature {
namespace {

RawImage block_image() {
  testing::SplitMix64 rng(42);
  RawImage img(64, 64);
  for (std::size_t by = 0; by < 8; ++by) {
    for (std::size_t bx = 0; bx < 8; ++bx) {
      const auto r = static_cast<std::uint8_t>(rng.next() % 256);
      const auto g = static_cast<std::uint8_t>(rng.next() % 256);
      const auto b = static_cast<std::uint8_t>(rng.next() % 256);
      img.fill_rect(bx * 8, by * 8, bx * 8 + 8, by * 8 + 8, r, g, b);
    }
  }
  return img;
}

RawImage brighten(const RawImage& img, double factor) {
  RawImage out = img;
  for (auto& v : out.pixels) {
    v = static_cast<std::uint8_t>(std::min(255.0, std::floor(v * factor + 0.5)));
  }
  return out;
}

RawImage noise_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  testing::SplitMix64 rng(seed);
  RawImage img(w, h);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.next() % 256);
  return img;
}

TEST(ColorHistogram, SumsToOne) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto hist = color_histogram(noise_image(17 + seed, 23, seed));
    ASSERT_EQ(hist.size(), kColorHistDim);
    double sum = 0.0;
    for (float v : hist) {
      EXPECT_GE(v, 0.0f);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(ColorHistogram, UniformRedFallsInRedBin) {
  RawImage img(64, 64);
  img.fill(255, 0, 0);
  const auto hist = color_histogram(img);
  const std::size_t red = color_bin(255, 0, 0);
  for (std::size_t cell = 0; cell < kColorGrid * kColorGrid; ++cell) {
    for (std::size_t bin = 0; bin < kColorBins; ++bin) {
      const float expected = bin == red ? 1.0f / 16.0f : 0.0f;
      EXPECT_FLOAT_EQ(hist[cell * kColorBins + bin], expected);
    }
  }
}

TEST(ColorHistogram, TinyImageStillNormalized) {
  RawImage img(1, 1);
  img.fill(10, 200, 30);
  const auto hist = color_histogram(img);
  EXPECT_NEAR(std::accumulate(hist.begin(), hist.end(), 0.0), 1.0, 1e-6);
}

TEST(ColorBin, HueSectorsAndAchromatic) {
  EXPECT_EQ(color_bin(255, 0, 0), 0u);
  EXPECT_NE(color_bin(0, 0, 255), color_bin(255, 0, 0));
  EXPECT_NE(color_bin(0, 255, 0), color_bin(0, 0, 255));
  EXPECT_EQ(color_bin(0, 0, 0), 8u);
  EXPECT_EQ(color_bin(255, 255, 255), 11u);
  EXPECT_EQ(color_bin(128, 128, 128), 10u);
}

TEST(DominantColor, UniformRed) {
  RawImage img(64, 64);
  img.fill(255, 0, 0);
  const auto dc = dominant_color(img);
  EXPECT_NEAR(dc.rgb[0], 255.0f, 1e-4);
  EXPECT_NEAR(dc.rgb[1], 0.0f, 1e-4);
  EXPECT_NEAR(dc.rgb[2], 0.0f, 1e-4);
  EXPECT_FLOAT_EQ(dc.weight, 1.0f);
}

TEST(DominantColor, HeaviestClusterWins) {
  RawImage img(40, 40);
  img.fill(0, 0, 255);
  img.fill_rect(0, 0, 40, 10, 255, 255, 0);
  const auto dc = dominant_color(img);
  EXPECT_NEAR(dc.rgb[2], 255.0f, 1e-3);
  EXPECT_NEAR(dc.weight, 0.75f, 1e-6);
}

TEST(PerceptualHash, MatchesReferenceValue) {
  EXPECT_EQ(perceptual_hash(block_image()), 0x4f396f8309c45379ULL);
}

TEST(PerceptualHash, BrightnessShiftIsNearDuplicate) {
  const RawImage base = block_image();
  const auto h0 = perceptual_hash(base);
  const auto h1 = perceptual_hash(brighten(base, 1.05));
  EXPECT_EQ(hamming_distance(h0, h1), 0);
  EXPECT_LE(hamming_distance(h0, h1), 6);
}

TEST(PerceptualHash, DistinctImagesDiffer) {
  const auto a = perceptual_hash(noise_image(64, 64, 1));
  const auto b = perceptual_hash(noise_image(64, 64, 2));
  EXPECT_GT(hamming_distance(a, b), 10);
}

TEST(PerceptualHash, NonMultipleSizes) {
  const auto img = noise_image(45, 77, 9);
  EXPECT_EQ(perceptual_hash(img), perceptual_hash(img));
  RawImage tiny(3, 2);
  tiny.fill(100, 100, 100);
  EXPECT_NO_THROW(perceptual_hash(tiny));
}

TEST(GrayThumbnail, AreaAverage) {
  RawImage img(4, 2);
  img.fill(0, 0, 0);
  img.fill_rect(0, 0, 2, 2, 255, 255, 255);
  const auto t = gray_thumbnail(img, 2, 1);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_NEAR(t[0], 255.0, 1e-9);
  EXPECT_NEAR(t[1], 0.0, 1e-9);
  const auto up = gray_thumbnail(img, 8, 4);
  EXPECT_NEAR(up[0], 255.0, 1e-9);
  EXPECT_NEAR(up[7], 0.0, 1e-9);
}

TEST(LayoutDescriptor, UnitNormOrZero) {
  const auto v = layout_descriptor(noise_image(50, 30, 4));
  ASSERT_EQ(v.size(), kLayoutDim);
  double sq = 0.0;
  for (float x : v) sq += double(x) * x;
  EXPECT_NEAR(sq, 1.0, 1e-5);
  RawImage flat(16, 16);
  flat.fill(7, 7, 7);
  for (float x : layout_descriptor(flat)) EXPECT_EQ(x, 0.0f);
}

}  // namespace
}  // namespace viscade::feature
