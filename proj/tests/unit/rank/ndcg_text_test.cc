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

#include <gtest/gtest.h>

#include <cmath>

#include "viscade/core/error.h"
#include "viscade/rank/ndcg.h"
#include "viscade/rank/text_match.h"

namespace viscade::rank {
namespace {

TEST(Ndcg, IdealOrderingIsOne) {
  const std::vector<int> g = {4, 3, 3, 1, 0};
  EXPECT_DOUBLE_EQ(ndcg_at_k(g, g, 5), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(g, g, 2), 1.0);
}

TEST(Ndcg, AllZeroIsOne) {
  const std::vector<int> g = {0, 0, 0};
  EXPECT_DOUBLE_EQ(ndcg_at_k(g, g, 3), 1.0);
}

TEST(Ndcg, HandComputedValue) {
  const std::vector<int> ranked = {1, 3, 0};
  const double expected = (1.0 + 7.0 / std::log2(3.0)) / (7.0 + 1.0 / std::log2(3.0));
  EXPECT_NEAR(ndcg_at_k(ranked, ranked, 3), expected, 1e-12);
  EXPECT_NEAR(ndcg_at_k(ranked, ranked, 3), 0.709809741397, 1e-12);
}

TEST(Ndcg, IdMapFormAndMissingLabels) {
  GradeMap labels = {{10, 3}, {20, 1}};
  const std::vector<std::uint64_t> ranked = {99, 10, 20};
  const double expected = (7.0 / std::log2(3.0) + 1.0 / 2.0) / (7.0 + 1.0 / std::log2(3.0));
  EXPECT_NEAR(ndcg_at_k(ranked, labels, 3), expected, 1e-12);
}

TEST(Ndcg, BoundsAndBadK) {
  const std::vector<int> ranked = {0, 0, 4};
  const double v = ndcg_at_k(ranked, ranked, 2);
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
  EXPECT_THROW(ndcg_at_k(ranked, ranked, 0), Error);
}

TextStats toy_corpus() {
  TextStats stats;
  for (const char* doc : {"red leather sofa", "leather sofa sale", "blue cotton shirt",
                          "red cotton dress", "wooden dining table"}) {
    stats.add_document(doc);
  }
  return stats;
}

TEST(TextMatch, HandComputedIdfSquaredSum) {
  const auto stats = toy_corpus();
  const double idf = std::log(1.0 + 5.0 / 2.0);
  EXPECT_NEAR(stats.score("red leather sofa", "leather sofa sale"), 2 * idf * idf, 1e-12);
  EXPECT_NEAR(stats.score("red leather sofa", "leather sofa sale"), 3.138830110467, 1e-9);
}

TEST(TextMatch, DisjointAndEmpty) {
  const auto stats = toy_corpus();
  EXPECT_EQ(stats.score("blue shirt", "wooden table"), 0.0);
  EXPECT_EQ(stats.score("", "red sofa"), 0.0);
  EXPECT_EQ(stats.score("", ""), 0.0);
}

TEST(TextMatch, IdenticalTextsAreMaximal) {
  const auto stats = toy_corpus();
  const double self = stats.score("Red, cotton DRESS!", "red cotton dress");
  EXPECT_GT(self, 0.0);
  for (const char* other : {"red cotton", "cotton dress sale", "red sofa", "dress"}) {
    EXPECT_LT(stats.score("red cotton dress", other), self);
  }
}

TEST(TextMatch, TokenizerFoldsCaseAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Hello,World  foo-bar42"),
            (std::vector<std::string>{"hello", "world", "foo", "bar42"}));
  EXPECT_TRUE(tokenize("  ,.;  ").empty());
}

TEST(TextMatch, UnknownTermUsesDfOne) {
  const auto stats = toy_corpus();
  EXPECT_NEAR(stats.idf("zebra"), std::log(6.0), 1e-12);
}

}  // namespace
}  // namespace viscade::rank
