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

#include "viscade/rank/feature_row.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "viscade/core/error.h"

namespace viscade::rank {
namespace {

constexpr double kMinScale = 1e-12;

}  // namespace

FeatureRegistry::FeatureRegistry(std::vector<FamilyScale> families)
    : families_(std::move(families)) {
  for (auto& f : families_) {
    require(std::isfinite(f.scale) && f.scale >= 0.0, ErrorCode::kConfig,
            "family " + f.family + " has an invalid distance scale");
    f.scale = std::max(f.scale, kMinScale);
  }
}

std::vector<std::string> FeatureRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& f : families_) out.push_back("dist:" + f.family);
  out.insert(out.end(), {"color_distance", "category_match", "text_match", "l1_distance"});
  for (const auto& f : families_) out.push_back("mask:" + f.family);
  out.insert(out.end(), {"mask:color", "mask:category", "mask:text"});
  return out;
}

Digest128 FeatureRegistry::digest() const {
  std::string canonical;
  for (const auto& name : names()) canonical += name + "\n";
  for (const auto& f : families_) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g\n", f.scale);
    canonical += f.family + "=" + buf;
  }
  return md5(canonical);
}

nlohmann::json FeatureRegistry::to_json() const {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& f : families_) fams.push_back({{"family", f.family}, {"scale", f.scale}});
  return {{"families", fams}, {"names", names()}, {"digest", digest().hex()}};
}

FeatureRegistry FeatureRegistry::from_json(const nlohmann::json& j) {
  std::vector<FamilyScale> fams;
  for (const auto& f : j.at("families")) {
    fams.push_back({f.at("family").get<std::string>(), f.at("scale").get<double>()});
  }
  FeatureRegistry reg(std::move(fams));
  if (j.contains("digest")) {
    require(j.at("digest").get<std::string>() == reg.digest().hex(), ErrorCode::kIntegrity,
            "feature registry digest does not match its contents");
  }
  return reg;
}

double color_distance(const feature::DominantColor& a, const feature::DominantColor& b) {
  double sq = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = double(a.rgb[c]) - b.rgb[c];
    sq += d * d;
  }
  return std::min(1.0, std::sqrt(sq) / (255.0 * std::sqrt(3.0)));
}

L2FeatureRow assemble_feature_row(const feature::FeatureBundle& query,
                                  const feature::FeatureBundle& candidate,
                                  double l1_distance, const FeatureRegistry& registry,
                                  const TextStats& text_stats) {
  L2FeatureRow row(registry.arity(), 0.0f);
  const auto& families = registry.families();
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto* q = query.embedding(families[f].family);
    const auto* c = candidate.embedding(families[f].family);
    if (q == nullptr || c == nullptr || q->size() != c->size()) {
      row[f] = 1.0f;
      row[registry.family_mask_slot(f)] = 1.0f;
      continue;
    }
    const double d = squared_l2_f64(*q, *c);
    row[f] = static_cast<float>(d / (d + families[f].scale));
  }

  if (query.dominant_color && candidate.dominant_color) {
    row[registry.color_slot()] =
        static_cast<float>(color_distance(*query.dominant_color, *candidate.dominant_color));
  } else {
    row[registry.color_slot()] = 1.0f;
    row[registry.color_mask_slot()] = 1.0f;
  }

  if (query.category && candidate.category) {
    row[registry.category_slot()] = *query.category == *candidate.category ? 1.0f : 0.0f;
  } else {
    row[registry.category_mask_slot()] = 1.0f;
  }

  if (query.metadata_text && candidate.metadata_text && !query.metadata_text->empty() &&
      !candidate.metadata_text->empty()) {
    row[registry.text_slot()] = static_cast<float>(
        text_stats.score(*query.metadata_text, *candidate.metadata_text));
  } else {
    row[registry.text_mask_slot()] = 1.0f;
  }

  row[registry.l1_slot()] = static_cast<float>(l1_distance);
  return row;
}

double median_pairwise_sq_distance(const Matrix& vectors, std::size_t max_pairs,
                                   std::uint64_t seed) {
  const std::size_t n = vectors.rows;
  if (n < 2) return 1.0;
  std::vector<double> d;
  const std::size_t all_pairs = n * (n - 1) / 2;
  if (all_pairs <= max_pairs) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        d.push_back(squared_l2_f64(vectors.row(a), vectors.row(b)));
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (d.size() < max_pairs) {
      const std::size_t a = pick(rng), b = pick(rng);
      if (a != b) d.push_back(squared_l2_f64(vectors.row(a), vectors.row(b)));
    }
  }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

}  // namespace viscade::rank
