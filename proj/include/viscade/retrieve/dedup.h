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

#ifndef VISCADE_RETRIEVE_DEDUP_H_
#define VISCADE_RETRIEVE_DEDUP_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "viscade/core/digest.h"

namespace viscade::retrieve {

inline constexpr int kDefaultPhashThreshold = 6;

struct DedupKey {
  std::optional<Digest128> digest;
  std::optional<std::uint64_t> phash;
};

// Groups items (already in score order) whose digests are equal or whose
// phashes are within `threshold` bits, transitively. Returns, per item, the
// index of its group's first member.
std::vector<std::size_t> duplicate_groups(std::span<const DedupKey> keys, int threshold);

// Indices of the first member of each group, in input order.
std::vector<std::size_t> dedup_survivors(std::span<const DedupKey> keys,
                                         int threshold = kDefaultPhashThreshold);

}  // namespace viscade::retrieve

#endif  // VISCADE_RETRIEVE_DEDUP_H_
