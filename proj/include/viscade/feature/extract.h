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

#ifndef VISCADE_FEATURE_EXTRACT_H_
#define VISCADE_FEATURE_EXTRACT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viscade/feature/feature_bundle.h"
#include "viscade/feature/image.h"
#include "viscade/feature/pipeline.h"

namespace viscade::feature {

// Signals that cannot be derived from pixels.
struct ExtractInputs {
  // Vectors for external families, keyed by family name.
  std::map<std::string, std::vector<float>, std::less<>> external;
  std::optional<std::string> category;
  std::optional<std::string> metadata_text;
};

// Computes every family the pipeline can produce from the (cropped) pixels
// and the supplied inputs. External families without a supplied vector are
// left out of the bundle. The digest covers the uncropped image's canonical
// pixel encoding.
FeatureBundle extract_features(const RawImage& image, const std::optional<CropRect>& crop,
                               const PipelineConfig& pipeline,
                               const ExtractInputs& inputs = {});

// Same as above, but decodes first and digests the encoded bytes as given.
FeatureBundle extract_features(std::span<const std::uint8_t> encoded,
                               const std::optional<CropRect>& crop,
                               const PipelineConfig& pipeline,
                               const ExtractInputs& inputs = {});

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_EXTRACT_H_
