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

#ifndef VISCADE_RANK_JUDGMENTS_H_
#define VISCADE_RANK_JUDGMENTS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace viscade::rank {

struct PairwiseJudgment {
  std::string query_id;
  std::uint64_t winner = 0;
  std::uint64_t loser = 0;
  bool tie = false;

  friend auto operator<=>(const PairwiseJudgment&, const PairwiseJudgment&) = default;
};

struct ListwiseLabel {
  std::string query_id;
  std::uint64_t doc_id = 0;
  int grade = 0;  // 0..4
  double strength = 0.0;

  friend bool operator==(const ListwiseLabel&, const ListwiseLabel&) = default;
};

inline constexpr int kMaxGrade = 4;
inline constexpr double kBradleyTerryPrior = 0.1;

// Dense counts for n items: wins[i*n+j] = times i beat j, ties symmetric.
struct ComparisonCounts {
  std::size_t n = 0;
  std::vector<double> wins;
  std::vector<double> ties;

  explicit ComparisonCounts(std::size_t items)
      : n(items), wins(items * items, 0.0), ties(items * items, 0.0) {}
};

struct BradleyTerryFit {
  std::vector<double> theta;      // log-strengths, centered per component
  std::vector<int> component;     // connected component of each item
  std::size_t components = 0;
  std::size_t iterations = 0;
};

// Maximum likelihood by minorization-maximization. A tie counts as half a
// win for each side, and every compared pair gets `prior` pseudo-wins in each
// direction so that undefeated items keep a finite strength.
BradleyTerryFit bradley_terry(const ComparisonCounts& counts,
                              double prior = kBradleyTerryPrior,
                              double tolerance = 1e-12, std::size_t max_iters = 100000);

// Quintile bucketing of strengths with mid-ranks for equal values.
std::vector<int> strengths_to_grades(std::span<const double> theta);

// Labels sorted by (query_id, doc_id). Input order does not matter.
std::vector<ListwiseLabel> pairwise_to_listwise(std::span<const PairwiseJudgment> judgments);

// JSON lines of {"query_id", "winner", "loser", "tie"}.
std::vector<PairwiseJudgment> load_judgments(const std::filesystem::path& path);
void save_judgments(const std::filesystem::path& path,
                    std::span<const PairwiseJudgment> judgments);
// JSON lines of {"query_id", "doc_id", "grade", "strength"}.
std::vector<ListwiseLabel> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, std::span<const ListwiseLabel> labels);

}  // namespace viscade::rank

#endif  // VISCADE_RANK_JUDGMENTS_H_
