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

#include "viscade/core/digest.h"

#include <openssl/evp.h>

#include <cstdio>

#include "viscade/core/error.h"

namespace viscade {

std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                           text.size()));
}

std::string Digest128::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(32);
  for (auto b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

Digest128 Digest128::from_hex(std::string_view hex) {
  require(hex.size() == 32, ErrorCode::kLoad, "digest must be 32 hex chars");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw_error(ErrorCode::kLoad, "invalid hex digit in digest");
  };
  Digest128 d;
  for (std::size_t i = 0; i < 16; ++i) {
    d.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 |
                                           nibble(hex[2 * i + 1]));
  }
  return d;
}

Digest128 md5(std::span<const std::uint8_t> bytes) {
  Digest128 d;
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.bytes.data(), &len, EVP_md5(),
                 nullptr) != 1 ||
      len != d.bytes.size()) {
    throw_error(ErrorCode::kIo, "MD5 digest failed");
  }
  return d;
}

Digest128 md5(std::string_view text) {
  return md5(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                       text.size()));
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace viscade
