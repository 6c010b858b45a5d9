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

#ifndef VISCADE_FEATURE_PIPELINE_H_
#define VISCADE_FEATURE_PIPELINE_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "viscade/core/digest.h"
#include "viscade/core/kv_config.h"
#include "viscade/feature/triplet.h"

namespace viscade::feature {

enum class FamilyKind { kColorHist, kLayout, kExternal, kTriplet };

std::string_view family_kind_name(FamilyKind kind);
FamilyKind parse_family_kind(std::string_view text);

struct FamilySpec {
  std::string name;
  FamilyKind kind = FamilyKind::kExternal;
  std::size_t dim = 0;
  std::string input;  // triplet only: source family
  std::filesystem::path model_path;  // triplet only
  std::shared_ptr<const TripletEmbeddingModel> model;
};

// Static description of which embedding families exist and how each is
// produced. Keys:
//   families = a,b,c
//   family.<name>.kind = color_hist | layout | external | triplet
//   family.<name>.dim = <int>          (required for external and triplet)
//   family.<name>.input = <family>     (triplet)
//   family.<name>.model = <path>       (triplet; relative to the config file)
//   l1_family = <name>
class PipelineConfig {
 public:
  // Color histogram only, which is also the L1 family.
  static PipelineConfig defaults();
  static PipelineConfig from_kv(const KvConfig& kv,
                                const std::filesystem::path& base_dir = {},
                                bool load_models = true);
  static PipelineConfig load(const std::filesystem::path& path, bool load_models = true);

  const std::vector<FamilySpec>& families() const { return families_; }
  const FamilySpec* find(std::string_view name) const;
  const FamilySpec& require_family(std::string_view name) const;
  const std::string& l1_family() const { return l1_family_; }

  // Digest of the canonical key/value form. Feature caches key on it.
  const Digest128& digest() const { return digest_; }
  const KvConfig& kv() const { return kv_; }

 private:
  std::vector<FamilySpec> families_;
  std::string l1_family_;
  Digest128 digest_{};
  KvConfig kv_;
};

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_PIPELINE_H_
