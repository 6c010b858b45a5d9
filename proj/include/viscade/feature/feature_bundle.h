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

#ifndef VISCADE_FEATURE_FEATURE_BUNDLE_H_
#define VISCADE_FEATURE_FEATURE_BUNDLE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "viscade/core/digest.h"
#include "viscade/feature/descriptors.h"

namespace viscade::feature {

// Every per-image signal the engine consumes. Pixel-derived fields are
// optional because documents may arrive with ingested embeddings only.
struct FeatureBundle {
  std::map<std::string, std::vector<float>, std::less<>> embeddings;
  std::vector<float> color_hist;  // empty when not pixel-derived
  std::optional<DominantColor> dominant_color;
  std::optional<std::string> category;
  std::optional<std::uint64_t> phash;
  std::optional<Digest128> digest;
  std::optional<std::string> metadata_text;

  const std::vector<float>* embedding(std::string_view family) const {
    auto it = embeddings.find(family);
    return it == embeddings.end() ? nullptr : &it->second;
  }

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_FEATURE_BUNDLE_H_
