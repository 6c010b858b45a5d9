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

#include "viscade/feature/extract.h"

#include "viscade/core/error.h"
#include "viscade/core/matrix.h"
#include "viscade/feature/descriptors.h"

namespace viscade::feature {
namespace {

FeatureBundle extract_pixels(const RawImage& original, const std::optional<CropRect>& crop,
                             const PipelineConfig& pipeline, const ExtractInputs& inputs) {
  require(original.width >= 1 && original.height >= 1, ErrorCode::kDecode,
          "image has zero extent");
  const RawImage cropped = crop ? apply_crop(original, *crop) : RawImage{};
  const RawImage& image = crop ? cropped : original;

  FeatureBundle bundle;
  bundle.color_hist = color_histogram(image);
  bundle.dominant_color = dominant_color(image);
  bundle.phash = perceptual_hash(image);
  bundle.category = inputs.category;
  bundle.metadata_text = inputs.metadata_text;

  for (const FamilySpec& family : pipeline.families()) {
    switch (family.kind) {
      case FamilyKind::kColorHist:
        bundle.embeddings[family.name] = bundle.color_hist;
        break;
      case FamilyKind::kLayout:
        bundle.embeddings[family.name] = layout_descriptor(image);
        break;
      case FamilyKind::kExternal: {
        auto it = inputs.external.find(family.name);
        if (it == inputs.external.end()) break;
        check_dim(it->second.size(), family.dim,
                  ("external family " + family.name).c_str());
        bundle.embeddings[family.name] = it->second;
        break;
      }
      case FamilyKind::kTriplet: {
        const auto* input = bundle.embedding(family.input);
        if (input == nullptr) break;
        require(family.model != nullptr, ErrorCode::kConfig,
                "triplet family '" + family.name + "' has no loaded model");
        bundle.embeddings[family.name] = triplet_embed(*family.model, *input);
        break;
      }
    }
  }
  return bundle;
}

}  // namespace

FeatureBundle extract_features(const RawImage& image, const std::optional<CropRect>& crop,
                               const PipelineConfig& pipeline, const ExtractInputs& inputs) {
  FeatureBundle bundle = extract_pixels(image, crop, pipeline, inputs);
  bundle.digest = md5(canonical_bytes(image));
  return bundle;
}

FeatureBundle extract_features(std::span<const std::uint8_t> encoded,
                               const std::optional<CropRect>& crop,
                               const PipelineConfig& pipeline, const ExtractInputs& inputs) {
  const RawImage image = decode_image(encoded);
  FeatureBundle bundle = extract_pixels(image, crop, pipeline, inputs);
  bundle.digest = md5(encoded);
  return bundle;
}

}  // namespace viscade::feature
