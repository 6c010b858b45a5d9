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

#ifndef VISCADE_RANK_NDCG_H_
#define VISCADE_RANK_NDCG_H_

#include <cstdint>
#include <span>
#include <unordered_map>

namespace viscade::rank {

using GradeMap = std::unordered_map<std::uint64_t, int>;

// Gain 2^grade - 1, discount log2(rank + 1) with rank starting at 1.
double dcg_at_k(std::span<const int> grades, std::size_t k);

// NDCG of a ranked list whose grades are given in ranked order, normalized by
// the ideal ordering of `all_grades` (the judged pool). Ideal DCG of 0 gives 1.
double ndcg_at_k(std::span<const int> ranked_grades, std::span<const int> all_grades,
                 std::size_t k);

// Unlabeled ids count as grade 0. The ideal ordering uses every label.
double ndcg_at_k(std::span<const std::uint64_t> ranked, const GradeMap& labels,
                 std::size_t k);

}  // namespace viscade::rank

#endif  // VISCADE_RANK_NDCG_H_
