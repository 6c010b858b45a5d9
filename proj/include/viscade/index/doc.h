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

#ifndef VISCADE_INDEX_DOC_H_
#define VISCADE_INDEX_DOC_H_

#include <cstdint>
#include <optional>
#include <string>

#include "viscade/core/digest.h"
#include "viscade/feature/feature_bundle.h"

namespace viscade::index {

struct ImageDoc {
  std::uint64_t image_id = 0;
  std::string source_uri;
  std::string metadata_text;
  std::optional<std::string> category;
  feature::FeatureBundle features;
};

// Per-document record kept in a shard's metadata store.
struct DocMeta {
  std::uint64_t image_id = 0;
  std::string source_uri;
  std::string metadata_text;
  std::optional<std::string> category;
  std::optional<std::uint64_t> phash;
  std::optional<Digest128> digest;
  std::optional<feature::DominantColor> dominant_color;

  friend bool operator==(const DocMeta&, const DocMeta&) = default;
};

// Stable FNV-1a over the little-endian id bytes, modulo k.
std::uint32_t shard_assign(std::uint64_t image_id, std::uint32_t k);

}  // namespace viscade::index

#endif  // VISCADE_INDEX_DOC_H_
