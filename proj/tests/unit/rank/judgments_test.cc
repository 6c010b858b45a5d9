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

#include "viscade/rank/judgments.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "support/splitmix.h"
#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::rank {
namespace {

ComparisonCounts oracle_counts() {
  testing::SplitMix64 rng(5);
  ComparisonCounts c(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i != j) c.wins[i * 4 + j] = static_cast<double>(rng.next() % 5);
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      const double t = static_cast<double>(rng.next() % 3);
      c.ties[i * 4 + j] = c.ties[j * 4 + i] = t;
    }
  }
  return c;
}

TEST(BradleyTerry, MatchesNumericalMle) {
  const auto c = oracle_counts();
  EXPECT_EQ(c.wins, (std::vector<double>{0, 3, 4, 3, 4, 0, 1, 1, 4, 0, 0, 0, 0, 1, 4, 0}));
  const auto fit = bradley_terry(c);
  const double expected[] = {0.080763175, 0.300250157, -0.502393308, 0.121379976};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(fit.theta[i], expected[i], 1e-6);
  EXPECT_EQ(fit.components, 1u);
}

TEST(BradleyTerry, GradientVanishesAtSolution) {
  const auto c = oracle_counts();
  const auto fit = bradley_terry(c);
  const std::size_t n = c.n;
  for (std::size_t i = 0; i < n; ++i) {
    double grad = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool compared = c.wins[i * n + j] + c.wins[j * n + i] + c.ties[i * n + j] > 0;
      if (!compared) continue;
      const double wij = c.wins[i * n + j] + 0.5 * c.ties[i * n + j] + kBradleyTerryPrior;
      const double wji = c.wins[j * n + i] + 0.5 * c.ties[i * n + j] + kBradleyTerryPrior;
      const double p = 1.0 / (1.0 + std::exp(fit.theta[j] - fit.theta[i]));
      grad += wij - (wij + wji) * p;
    }
    EXPECT_NEAR(grad, 0.0, 1e-8);
  }
}

TEST(PairwiseToListwise, TransitiveChainIsStrictlyOrdered) {
  const std::vector<PairwiseJudgment> j = {{"q", 1, 2, false}, {"q", 2, 3, false},
                                           {"q", 1, 3, false}};
  const auto labels = pairwise_to_listwise(j);
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_GT(labels[0].grade, labels[1].grade);
  EXPECT_GT(labels[1].grade, labels[2].grade);
}

TEST(PairwiseToListwise, SymmetricWinsGiveEqualGrades) {
  const std::vector<PairwiseJudgment> j = {{"q", 7, 8, false}, {"q", 8, 7, false},
                                           {"q", 7, 8, true}};
  const auto labels = pairwise_to_listwise(j);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_NEAR(labels[0].strength, labels[1].strength, 1e-12);
  EXPECT_EQ(labels[0].grade, labels[1].grade);
}

TEST(PairwiseToListwise, OrderIndependent) {
  std::vector<PairwiseJudgment> j;
  testing::SplitMix64 rng(3);
  for (int i = 0; i < 60; ++i) {
    const auto a = rng.next() % 8, b = rng.next() % 8;
    if (a == b) continue;
    j.push_back({"q" + std::to_string(rng.next() % 3), a, b, rng.next() % 7 == 0});
  }
  const auto base = pairwise_to_listwise(j);
  std::mt19937 shuffle_rng(1);
  std::shuffle(j.begin(), j.end(), shuffle_rng);
  EXPECT_EQ(pairwise_to_listwise(j), base);
}

TEST(PairwiseToListwise, GradeOrderFollowsTransitiveTournament) {
  // Full round robin where lower id always wins.
  std::vector<PairwiseJudgment> j;
  for (std::uint64_t a = 0; a < 10; ++a) {
    for (std::uint64_t b = a + 1; b < 10; ++b) j.push_back({"t", a, b, false});
  }
  const auto labels = pairwise_to_listwise(j);
  for (std::size_t i = 1; i < labels.size(); ++i) {
    EXPECT_LE(labels[i].grade, labels[i - 1].grade);
    EXPECT_LT(labels[i].strength, labels[i - 1].strength);
  }
  EXPECT_EQ(labels.front().grade, 4);
  EXPECT_EQ(labels.back().grade, 0);
}

TEST(PairwiseToListwise, DisconnectedComponentsStillLabeled) {
  const std::vector<PairwiseJudgment> j = {{"q", 1, 2, false}, {"q", 3, 4, false}};
  const auto labels = pairwise_to_listwise(j);
  ASSERT_EQ(labels.size(), 4u);
  EXPECT_NEAR(labels[0].strength, labels[2].strength, 1e-9);
  EXPECT_GT(labels[0].grade, labels[1].grade);
  EXPECT_THROW(pairwise_to_listwise(std::vector<PairwiseJudgment>{{"q", 1, 1, false}}), Error);
}

TEST(Grades, QuintileBuckets) {
  EXPECT_EQ(strengths_to_grades(std::vector<double>{0, 1, 2, 3, 4}),
            (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(strengths_to_grades(std::vector<double>{5.0}), (std::vector<int>{2}));
  for (int g : strengths_to_grades(std::vector<double>(20, 1.0))) EXPECT_EQ(g, 2);
}

TEST(JudgmentIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path();
  const std::vector<PairwiseJudgment> j = {{"a", 1, 2, false}, {"b", 3, 4, true}};
  save_judgments(dir / "viscade_j.jsonl", j);
  EXPECT_EQ(load_judgments(dir / "viscade_j.jsonl"), j);
  const auto labels = pairwise_to_listwise(j);
  save_labels(dir / "viscade_l.jsonl", labels);
  EXPECT_EQ(load_labels(dir / "viscade_l.jsonl"), labels);
  write_file_text(dir / "viscade_bad.jsonl", "{\"query_id\": 1}\n");
  EXPECT_THROW(load_judgments(dir / "viscade_bad.jsonl"), Error);
}

}  // namespace
}  // namespace viscade::rank
