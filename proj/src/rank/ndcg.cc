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

#include "viscade/rank/ndcg.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "viscade/core/error.h"

namespace viscade::rank {

double dcg_at_k(std::span<const int> grades, std::size_t k) {
  double dcg = 0.0;
  const std::size_t n = std::min(k, grades.size());
  for (std::size_t i = 0; i < n; ++i) {
    dcg += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg;
}

double ndcg_at_k(std::span<const int> ranked_grades, std::span<const int> all_grades,
                 std::size_t k) {
  require(k >= 1, ErrorCode::kConfig, "NDCG cutoff k must be >= 1");
  std::vector<int> ideal(all_grades.begin(), all_grades.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double ideal_dcg = dcg_at_k(ideal, k);
  if (ideal_dcg <= 0.0) return 1.0;
  return std::clamp(dcg_at_k(ranked_grades, k) / ideal_dcg, 0.0, 1.0);
}

double ndcg_at_k(std::span<const std::uint64_t> ranked, const GradeMap& labels,
                 std::size_t k) {
  std::vector<int> grades;
  grades.reserve(ranked.size());
  for (auto id : ranked) {
    auto it = labels.find(id);
    grades.push_back(it == labels.end() ? 0 : it->second);
  }
  std::vector<int> all;
  all.reserve(labels.size());
  for (const auto& [id, g] : labels) all.push_back(g);
  return ndcg_at_k(grades, all, k);
}

}  // namespace viscade::rank
