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

#ifndef VISCADE_CORE_DIGEST_H_
#define VISCADE_CORE_DIGEST_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace viscade {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                                std::uint64_t hash = kFnvOffsetBasis) {
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= kFnvPrime;
  }
  return hash;
}

std::uint64_t fnv1a64(std::string_view text);

// FNV-1a over the 8 little-endian bytes of `value`.
constexpr std::uint64_t fnv1a64_u64(std::uint64_t value) {
  std::uint64_t hash = kFnvOffsetBasis;
  for (int i = 0; i < 8; ++i) {
    hash ^= (value >> (8 * i)) & 0xff;
    hash *= kFnvPrime;
  }
  return hash;
}

// 128-bit content digest (MD5).
struct Digest128 {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const;
  static Digest128 from_hex(std::string_view hex);
  friend bool operator==(const Digest128&, const Digest128&) = default;
  friend auto operator<=>(const Digest128&, const Digest128&) = default;
};

Digest128 md5(std::span<const std::uint8_t> bytes);
Digest128 md5(std::string_view text);

std::string to_hex(std::uint64_t value);

}  // namespace viscade

#endif  // VISCADE_CORE_DIGEST_H_
