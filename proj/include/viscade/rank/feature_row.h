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

#ifndef VISCADE_RANK_FEATURE_ROW_H_
#define VISCADE_RANK_FEATURE_ROW_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "viscade/core/digest.h"
#include "viscade/core/matrix.h"
#include "viscade/feature/feature_bundle.h"
#include "viscade/rank/text_match.h"

namespace viscade::rank {

struct FamilyScale {
  std::string family;
  double scale = 1.0;  // squared distance that maps to 0.5

  friend bool operator==(const FamilyScale&, const FamilyScale&) = default;
};

// Fixed slot layout of a Level-2 row:
//   dist:<family>...  color_distance  category_match  text_match  l1_distance
//   mask:<family>...  mask:color  mask:category  mask:text
class FeatureRegistry {
 public:
  FeatureRegistry() = default;
  explicit FeatureRegistry(std::vector<FamilyScale> families);

  const std::vector<FamilyScale>& families() const { return families_; }
  std::size_t arity() const { return 2 * families_.size() + 7; }
  std::vector<std::string> names() const;
  Digest128 digest() const;

  std::size_t color_slot() const { return families_.size(); }
  std::size_t category_slot() const { return families_.size() + 1; }
  std::size_t text_slot() const { return families_.size() + 2; }
  std::size_t l1_slot() const { return families_.size() + 3; }
  std::size_t family_mask_slot(std::size_t f) const { return families_.size() + 4 + f; }
  std::size_t color_mask_slot() const { return 2 * families_.size() + 4; }
  std::size_t category_mask_slot() const { return 2 * families_.size() + 5; }
  std::size_t text_mask_slot() const { return 2 * families_.size() + 6; }

  nlohmann::json to_json() const;
  static FeatureRegistry from_json(const nlohmann::json& j);

  friend bool operator==(const FeatureRegistry&, const FeatureRegistry&) = default;

 private:
  std::vector<FamilyScale> families_;
};

using L2FeatureRow = std::vector<float>;

// Euclidean RGB distance divided by its maximum, 255 * sqrt(3).
double color_distance(const feature::DominantColor& a, const feature::DominantColor& b);

// Pure function of its inputs. Missing signals on either side take the
// slot's default (distance 1, match 0) and set the slot's mask bit.
L2FeatureRow assemble_feature_row(const feature::FeatureBundle& query,
                                  const feature::FeatureBundle& candidate,
                                  double l1_distance, const FeatureRegistry& registry,
                                  const TextStats& text_stats);

// Median squared distance over up to `max_pairs` seeded random row pairs.
double median_pairwise_sq_distance(const Matrix& vectors, std::size_t max_pairs,
                                   std::uint64_t seed);

}  // namespace viscade::rank

#endif  // VISCADE_RANK_FEATURE_ROW_H_
