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

#include "viscade/feature/pipeline.h"

#include <set>

#include "viscade/core/error.h"
#include "viscade/feature/descriptors.h"

namespace viscade::feature {

std::string_view family_kind_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kColorHist: return "color_hist";
    case FamilyKind::kLayout: return "layout";
    case FamilyKind::kExternal: return "external";
    case FamilyKind::kTriplet: return "triplet";
  }
  return "unknown";
}

FamilyKind parse_family_kind(std::string_view text) {
  if (text == "color_hist") return FamilyKind::kColorHist;
  if (text == "layout") return FamilyKind::kLayout;
  if (text == "external") return FamilyKind::kExternal;
  if (text == "triplet") return FamilyKind::kTriplet;
  throw_error(ErrorCode::kConfig, "unknown feature family kind '" + std::string(text) +
                                      "' (expected color_hist, layout, external, triplet)");
}

PipelineConfig PipelineConfig::defaults() {
  KvConfig kv;
  kv.set("families", "color_hist");
  kv.set("family.color_hist.kind", "color_hist");
  kv.set("l1_family", "color_hist");
  return from_kv(kv);
}

PipelineConfig PipelineConfig::from_kv(const KvConfig& kv,
                                       const std::filesystem::path& base_dir,
                                       bool load_models) {
  PipelineConfig cfg;
  cfg.kv_ = kv;
  const auto names = split_list(kv.require_string("families"));
  require(!names.empty(), ErrorCode::kConfig, "pipeline lists no families");
  std::set<std::string, std::less<>> seen;
  for (const auto& name : names) {
    require(seen.insert(name).second, ErrorCode::kConfig,
            "family '" + name + "' listed twice");
    const std::string prefix = "family." + name + ".";
    FamilySpec spec;
    spec.name = name;
    spec.kind = parse_family_kind(kv.get_string(prefix + "kind", name));
    switch (spec.kind) {
      case FamilyKind::kColorHist:
        spec.dim = kColorHistDim;
        break;
      case FamilyKind::kLayout:
        spec.dim = kLayoutDim;
        break;
      case FamilyKind::kExternal:
      case FamilyKind::kTriplet: {
        const long long dim = kv.get_int(prefix + "dim", 0);
        require(dim > 0, ErrorCode::kConfig, "family '" + name + "' needs dim > 0");
        spec.dim = static_cast<std::size_t>(dim);
        break;
      }
    }
    if (kv.contains(prefix + "dim") && spec.kind != FamilyKind::kExternal &&
        spec.kind != FamilyKind::kTriplet) {
      require(static_cast<std::size_t>(kv.get_int(prefix + "dim", 0)) == spec.dim,
              ErrorCode::kConfig,
              "family '" + name + "' has fixed dim " + std::to_string(spec.dim));
    }
    if (spec.kind == FamilyKind::kTriplet) {
      spec.input = kv.require_string(prefix + "input");
      require(seen.contains(spec.input), ErrorCode::kConfig,
              "triplet family '" + name + "' input '" + spec.input +
                  "' must be listed before it");
      spec.model_path = kv.require_string(prefix + "model");
      if (spec.model_path.is_relative() && !base_dir.empty()) {
        spec.model_path = base_dir / spec.model_path;
      }
      if (load_models) {
        auto model = std::make_shared<TripletEmbeddingModel>(
            TripletEmbeddingModel::load(spec.model_path));
        const FamilySpec* input = cfg.find(spec.input);
        require(model->input_dim() == input->dim, ErrorCode::kConfig,
                "triplet model for '" + name + "' expects input dim " +
                    std::to_string(model->input_dim()) + ", family '" + spec.input +
                    "' has " + std::to_string(input->dim));
        require(model->output_dim() == spec.dim, ErrorCode::kConfig,
                "triplet model for '" + name + "' outputs dim " +
                    std::to_string(model->output_dim()) + ", config says " +
                    std::to_string(spec.dim));
        spec.model = std::move(model);
      }
    }
    cfg.families_.push_back(std::move(spec));
  }
  cfg.l1_family_ = kv.get_string("l1_family", cfg.families_.front().name);
  cfg.require_family(cfg.l1_family_);
  KvConfig relevant;
  relevant.set("l1_family", cfg.l1_family_);
  relevant.set("families", kv.require_string("families"));
  for (const auto& key : kv.keys_with_prefix("family.")) {
    relevant.set(key, *kv.get(key));
  }
  for (const auto& f : cfg.families_) {
    if (f.model) {
      relevant.set("family." + f.name + ".model_digest", md5(f.model->serialize()).hex());
    }
  }
  cfg.digest_ = md5(relevant.canonical());
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path, bool load_models) {
  return from_kv(KvConfig::load(path), path.parent_path(), load_models);
}

const FamilySpec* PipelineConfig::find(std::string_view name) const {
  for (const auto& f : families_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const FamilySpec& PipelineConfig::require_family(std::string_view name) const {
  const FamilySpec* f = find(name);
  if (f == nullptr) {
    throw_error(ErrorCode::kConfig, "unknown feature family '" + std::string(name) + "'");
  }
  return *f;
}

}  // namespace viscade::feature
