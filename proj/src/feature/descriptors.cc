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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "viscade/core/matrix.h"
#include "viscade/quantize/kmeans.h"

namespace viscade::feature {
namespace {

constexpr std::size_t kMaxColorSamples = 4096;

// Overlap weights for area-averaging `in` samples down (or up) to `out`.
struct Span1D {
  std::size_t begin;
  std::vector<double> weights;
};

std::vector<Span1D> area_weights(std::size_t in, std::size_t out) {
  std::vector<Span1D> spans(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(in, static_cast<std::size_t>(std::ceil(hi)));
    spans[o].begin = first;
    for (std::size_t i = first; i < last; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      spans[o].weights.push_back(overlap / scale);
    }
  }
  return spans;
}

}  // namespace

std::size_t color_bin(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double v = mx;
  const double s = mx > 0.0 ? (mx - mn) / mx : 0.0;
  if (v < 0.2 || s < 0.2) {
    return 8 + std::min<std::size_t>(3, static_cast<std::size_t>(v * 4.0));
  }
  const double c = mx - mn;
  double h;
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / c, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / c + 2.0);
  } else {
    h = 60.0 * ((r - g) / c + 4.0);
  }
  if (h < 0.0) h += 360.0;
  const double shifted = std::fmod(h + 22.5, 360.0);
  return std::min<std::size_t>(7, static_cast<std::size_t>(shifted / 45.0));
}

std::vector<float> color_histogram(const RawImage& image) {
  std::vector<std::uint64_t> counts(kColorHistDim, 0);
  for (std::size_t y = 0; y < image.height; ++y) {
    const std::size_t cy = y * kColorGrid / image.height;
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::size_t cx = x * kColorGrid / image.width;
      const auto* p = image.at(x, y);
      ++counts[(cy * kColorGrid + cx) * kColorBins + color_bin(p[0], p[1], p[2])];
    }
  }
  const double total = static_cast<double>(image.width * image.height);
  std::vector<float> hist(kColorHistDim);
  for (std::size_t i = 0; i < kColorHistDim; ++i) {
    hist[i] = static_cast<float>(counts[i] / total);
  }
  return hist;
}

DominantColor dominant_color(const RawImage& image) {
  const std::size_t n = image.width * image.height;
  // Deterministic stride sample keeps k-means cheap on large images.
  const std::size_t stride = std::max<std::size_t>(1, n / kMaxColorSamples);
  Matrix samples(0, 3);
  std::vector<std::uint32_t> packed;
  for (std::size_t i = 0; i < n; i += stride) {
    const auto* p = image.pixels.data() + i * 3;
    const float rgb[3] = {static_cast<float>(p[0]), static_cast<float>(p[1]),
                          static_cast<float>(p[2])};
    samples.append_row(rgb);
    packed.push_back(static_cast<std::uint32_t>(p[0]) << 16 | p[1] << 8 | p[2]);
  }
  std::sort(packed.begin(), packed.end());
  const auto distinct = static_cast<std::size_t>(
      std::unique(packed.begin(), packed.end()) - packed.begin());

  quantize::KMeansConfig cfg;
  cfg.k = std::min<std::size_t>(3, distinct);
  cfg.seed = 0;
  cfg.max_iters = 20;
  const auto km = quantize::kmeans(samples, cfg);

  std::vector<std::size_t> members(km.centroids.rows, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = image.pixels.data() + i * 3;
    const float rgb[3] = {static_cast<float>(p[0]), static_cast<float>(p[1]),
                          static_cast<float>(p[2])};
    ++members[quantize::nearest_row(km.centroids, rgb)];
  }
  const auto best = static_cast<std::size_t>(
      std::max_element(members.begin(), members.end()) - members.begin());
  DominantColor out;
  for (std::size_t j = 0; j < 3; ++j) out.rgb[j] = km.centroids(best, j);
  out.weight = static_cast<float>(static_cast<double>(members[best]) / n);
  return out;
}

std::vector<double> gray_thumbnail(const RawImage& image, std::size_t out_w,
                                   std::size_t out_h) {
  std::vector<double> gray(image.width * image.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto* p = image.pixels.data() + i * 3;
    gray[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  const auto wx = area_weights(image.width, out_w);
  const auto wy = area_weights(image.height, out_h);
  std::vector<double> rows(image.height * out_w, 0.0);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (std::size_t t = 0; t < wx[ox].weights.size(); ++t) {
        acc += wx[ox].weights[t] * gray[y * image.width + wx[ox].begin + t];
      }
      rows[y * out_w + ox] = acc;
    }
  }
  std::vector<double> out(out_w * out_h, 0.0);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (std::size_t t = 0; t < wy[oy].weights.size(); ++t) {
        acc += wy[oy].weights[t] * rows[(wy[oy].begin + t) * out_w + ox];
      }
      out[oy * out_w + ox] = acc;
    }
  }
  return out;
}

std::vector<float> layout_descriptor(const RawImage& image) {
  auto thumb = gray_thumbnail(image, kLayoutSide, kLayoutSide);
  const double mean = std::accumulate(thumb.begin(), thumb.end(), 0.0) / thumb.size();
  double norm = 0.0;
  for (auto& v : thumb) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(kLayoutDim, 0.0f);
  if (norm > 1e-9) {
    for (std::size_t i = 0; i < kLayoutDim; ++i) {
      out[i] = static_cast<float>(thumb[i] / norm);
    }
  }
  return out;
}

std::uint64_t perceptual_hash(const RawImage& image) {
  constexpr std::size_t kSide = 32;
  constexpr std::size_t kLow = 8;
  const auto thumb = gray_thumbnail(image, kSide, kSide);

  // Orthonormal DCT-II basis, evaluated directly (32 x 32 is tiny).
  static const auto basis = [] {
    std::vector<double> b(kSide * kSide);
    for (std::size_t k = 0; k < kSide; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / kSide) : std::sqrt(2.0 / kSide);
      for (std::size_t n = 0; n < kSide; ++n) {
        b[k * kSide + n] = scale * std::cos(M_PI * (2.0 * n + 1.0) * k / (2.0 * kSide));
      }
    }
    return b;
  }();

  // Rows first, keeping only the low-frequency columns, then columns.
  std::vector<double> row_dct(kSide * kLow, 0.0);
  for (std::size_t y = 0; y < kSide; ++y) {
    for (std::size_t k = 0; k < kLow; ++k) {
      double acc = 0.0;
      for (std::size_t x = 0; x < kSide; ++x) {
        acc += basis[k * kSide + x] * thumb[y * kSide + x];
      }
      row_dct[y * kLow + k] = acc;
    }
  }
  std::array<double, kLow * kLow> coeffs{};
  for (std::size_t ky = 0; ky < kLow; ++ky) {
    for (std::size_t kx = 0; kx < kLow; ++kx) {
      double acc = 0.0;
      for (std::size_t y = 0; y < kSide; ++y) {
        acc += basis[ky * kSide + y] * row_dct[y * kLow + kx];
      }
      coeffs[ky * kLow + kx] = acc;
    }
  }
  auto sorted = coeffs;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[31] + sorted[32]);
  std::uint64_t hash = 0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i] > median) hash |= std::uint64_t{1} << i;
  }
  return hash;
}

}  // namespace viscade::feature
