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

#include "viscade/feature/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <string>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

// jpeglib.h needs FILE declared first.
#include <jpeglib.h>
#include <png.h>

namespace viscade::feature {
namespace {

constexpr std::size_t kMaxSide = 1 << 14;

void check_size(std::size_t w, std::size_t h) {
  if (w < 1 || h < 1 || w > kMaxSide || h > kMaxSide) {
    throw_error(ErrorCode::kDecode, "image dimensions " + std::to_string(w) + "x" +
                                        std::to_string(h) + " out of range");
  }
}

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::equal(kSig, kSig + 8, b.begin());
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xff && b[1] == 0xd8 && b[2] == 0xff;
}

bool is_ppm(std::span<const std::uint8_t> b) {
  return b.size() >= 2 && b[0] == 'P' && b[1] == '6';
}

RawImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw_error(ErrorCode::kDecode, std::string("PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  try {
    check_size(image.width, image.height);
  } catch (...) {
    png_image_free(&image);
    throw;
  }
  RawImage out(image.width, image.height);
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw_error(ErrorCode::kDecode, "PNG: " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RawImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  // Only trivially destructible state lives across setjmp; the output buffer
  // is allocated by libjpeg's own pool-free path below.
  std::vector<std::uint8_t>* pixels = new std::vector<std::uint8_t>();
  std::size_t width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    delete pixels;
    throw_error(ErrorCode::kDecode, std::string("JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  if (width < 1 || height < 1 || width > kMaxSide || height > kMaxSide ||
      cinfo.output_components != 3) {
    jpeg_destroy_decompress(&cinfo);
    delete pixels;
    throw_error(ErrorCode::kDecode, "JPEG: unsupported dimensions or components");
  }
  pixels->resize(width * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels->data() + cinfo.output_scanline * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  RawImage out;
  out.width = width;
  out.height = height;
  out.pixels = std::move(*pixels);
  delete pixels;
  return out;
}

RawImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw_error(ErrorCode::kDecode, "PPM: malformed header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 20) throw_error(ErrorCode::kDecode, "PPM: header value too large");
    }
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (maxval != 255) throw_error(ErrorCode::kDecode, "PPM: only maxval 255 supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw_error(ErrorCode::kDecode, "PPM: malformed header");
  }
  ++pos;
  check_size(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  RawImage out(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  if (bytes.size() - pos < out.pixels.size()) {
    throw_error(ErrorCode::kDecode, "PPM: truncated pixel data");
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), out.pixels.size(),
              out.pixels.begin());
  return out;
}

}  // namespace

RawImage::RawImage(std::size_t w, std::size_t h)
    : width(w), height(h), pixels(w * h * 3, 0) {}

void RawImage::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  fill_rect(0, 0, width, height, r, g, b);
}

void RawImage::fill_rect(std::size_t x0, std::size_t y0, std::size_t x1,
                         std::size_t y1, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) {
  x1 = std::min(x1, width);
  y1 = std::min(y1, height);
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) {
      auto* p = at(x, y);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
  }
}

RawImage decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  if (is_ppm(bytes)) return decode_ppm(bytes);
  throw_error(ErrorCode::kDecode, "unrecognized image format (" +
                                      std::to_string(bytes.size()) + " bytes)");
}

std::vector<std::uint8_t> encode_ppm(const RawImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_png(const RawImage& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0,
                                 nullptr)) {
    throw_error(ErrorCode::kIo, std::string("PNG encode: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0,
                                 nullptr)) {
    throw_error(ErrorCode::kIo, std::string("PNG encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> canonical_bytes(const RawImage& image) {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.height));
  w.put_array<std::uint8_t>(image.pixels);
  return w.release();
}

CropRect CropRect::clamped() const {
  auto c = [](double v) { return std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0); };
  return {c(x0), c(y0), c(x1), c(y1)};
}

PixelRect crop_pixels(const CropRect& crop, std::size_t width, std::size_t height) {
  const CropRect c = crop.clamped();
  if (!(c.x0 < c.x1) || !(c.y0 < c.y1)) {
    throw_error(ErrorCode::kInvalidCrop, "crop box has zero area after clamping");
  }
  auto px = [](double v, std::size_t extent) {
    return static_cast<std::size_t>(std::llround(v * static_cast<double>(extent)));
  };
  PixelRect r{px(c.x0, width), px(c.y0, height), px(c.x1, width), px(c.y1, height)};
  if (r.x1 < r.x0 + kMinCropPixels || r.y1 < r.y0 + kMinCropPixels) {
    throw_error(ErrorCode::kInvalidCrop,
                "crop region " + std::to_string(r.x1 - std::min(r.x0, r.x1)) + "x" +
                    std::to_string(r.y1 - std::min(r.y0, r.y1)) +
                    " is smaller than 8x8 pixels");
  }
  return r;
}

RawImage apply_crop(const RawImage& image, const CropRect& crop) {
  const auto r = crop_pixels(crop, image.width, image.height);
  RawImage out(r.x1 - r.x0, r.y1 - r.y0);
  for (std::size_t y = 0; y < out.height; ++y) {
    std::copy_n(image.at(r.x0, r.y0 + y), out.width * 3, out.at(0, y));
  }
  return out;
}

}  // namespace viscade::feature
