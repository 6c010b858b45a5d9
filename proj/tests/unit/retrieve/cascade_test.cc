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

#include "viscade/retrieve/cascade.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "support/splitmix.h"
#include "viscade/retrieve/dedup.h"

namespace viscade::retrieve {
namespace {

using quantize::VisualWordSet;

VisualWordSet word_set(std::vector<std::uint16_t> ids) { return VisualWordSet{std::move(ids)}; }

index::Shard shard_with_words(const std::vector<std::pair<std::uint64_t, VisualWordSet>>& docs) {
  index::ShardBuilder builder(0, {}, {}, {}, {});
  for (const auto& [id, words] : docs) {
    index::ShardBuilder::Entry e;
    e.meta.image_id = id;
    e.words = words;
    builder.add(std::move(e));
  }
  return builder.finish();
}

TEST(Level0Test, UnionKeepsDocsSharingAWord) {
  const auto shard = shard_with_words({{1, word_set({0, 5})}, {2, word_set({3, 4})}});
  EXPECT_EQ(level0_match(word_set({0, 1}), shard, 1), (std::vector<std::uint64_t>{1}));
}

TEST(Level0Test, FullMatchThresholdNeedsIdenticalSet) {
  const auto shard = shard_with_words(
      {{1, word_set({2, 7, 1})}, {2, word_set({2, 7, 0})}, {3, word_set({2, 7, 1})}});
  EXPECT_EQ(level0_match(word_set({2, 7, 1}), shard, 3), (std::vector<std::uint64_t>{1, 3}));
  EXPECT_EQ(level0_match(word_set({2, 7, 1}), shard, 2), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_TRUE(level0_match(word_set({2, 7, 1}), shard, 4).empty());
}

TEST(Level0Test, NoSharedWordGivesNothing) {
  const auto shard = shard_with_words({{1, word_set({0, 0})}, {2, word_set({1, 1})}});
  EXPECT_TRUE(level0_match(word_set({2, 2}), shard, 1).empty());
}

TEST(Level0Test, MatchesLinearScanOnRandomShard) {
  testing::SplitMix64 rng(21);
  constexpr std::size_t kBooks = 4;
  std::vector<std::pair<std::uint64_t, VisualWordSet>> docs;
  std::set<std::uint64_t> ids;
  while (docs.size() < 5000) {
    const std::uint64_t id = rng.next() % 1000000;
    if (!ids.insert(id).second) continue;
    std::vector<std::uint16_t> w(kBooks);
    for (auto& x : w) x = static_cast<std::uint16_t>(rng.next() % 8);
    docs.push_back({id, word_set(w)});
  }
  const auto shard = shard_with_words(docs);
  for (int q = 0; q < 30; ++q) {
    std::vector<std::uint16_t> w(kBooks);
    for (auto& x : w) x = static_cast<std::uint16_t>(rng.next() % 8);
    const auto query = word_set(w);
    for (std::size_t m = 1; m <= kBooks; ++m) {
      std::vector<std::uint64_t> expected;
      for (const auto& [id, words] : docs) {
        std::size_t shared = 0;
        for (std::size_t b = 0; b < kBooks; ++b) shared += words.ids[b] == query.ids[b];
        if (shared >= m) expected.push_back(id);
      }
      std::sort(expected.begin(), expected.end());
      ASSERT_EQ(level0_match(query, shard, m), expected) << "m=" << m;
    }
  }
}

class Level1Test : public ::testing::Test {
 protected:
  void SetUp() override {
    const Matrix train = testing::gaussian_matrix(2000, 16, 4);
    codebook_ = quantize::pq_train(train, 4, 16, {.seed = 1, .max_iters = 8});
    testing::SplitMix64 rng(8);
    index::ShardBuilder builder(0, {"f"}, {4}, {}, {});
    for (std::uint64_t id = 0; id < 10000; ++id) {
      index::ShardBuilder::Entry e;
      e.meta.image_id = id * 3 + 1;
      std::vector<std::uint8_t> code(4);
      for (auto& c : code) c = static_cast<std::uint8_t>(rng.next() % 16);
      // Every 500th doc has no code.
      if (id % 500 == 7) e.codes.push_back(std::nullopt);
      else e.codes.push_back(code);
      builder.add(std::move(e));
    }
    shard_ = builder.finish();
  }

  quantize::PQCodebook codebook_;
  index::Shard shard_;
};

TEST_F(Level1Test, MatchesFullSortAndCountsMissingCodes) {
  const auto query = testing::gaussian_matrix(1, 16, 99);
  const auto table = quantize::pq_distance_table(codebook_, query.row(0));
  std::vector<std::size_t> ords(shard_.doc_count());
  std::iota(ords.begin(), ords.end(), 0);
  const auto l1 = level1_rank(ords, table, shard_, "f", 100);
  EXPECT_EQ(l1.skipped_missing_code, 20u);

  std::vector<Candidate> all;
  const auto* codes = shard_.codes("f");
  for (std::size_t o : ords) {
    if (const auto* c = codes->code(o)) {
      const float d = quantize::pq_adc_distance(table, std::span<const std::uint8_t>(c, 4));
      all.push_back({shard_.doc_ids()[o], d, 0, o});
    }
  }
  std::sort(all.begin(), all.end(), candidate_less);
  all.resize(100);
  EXPECT_EQ(l1.kept, all);
}

TEST_F(Level1Test, KeepAboveCountReturnsEverythingSorted) {
  const auto query = testing::gaussian_matrix(1, 16, 5);
  const auto table = quantize::pq_distance_table(codebook_, query.row(0));
  std::vector<std::size_t> ords = {5, 9, 200, 3000, 42};
  const auto l1 = level1_rank(ords, table, shard_, "f", 1000);
  ASSERT_EQ(l1.kept.size(), 5u);
  EXPECT_TRUE(std::is_sorted(l1.kept.begin(), l1.kept.end(), candidate_less));
}

TEST_F(Level1Test, OwnReconstructionHasZeroDistance) {
  const std::size_t ord = 1234;
  const auto* code = shard_.codes("f")->code(ord);
  const auto recon = quantize::pq_decode(codebook_, std::span<const std::uint8_t>(code, 4));
  const auto table = quantize::pq_distance_table(codebook_, recon);
  const std::vector<std::size_t> ords = {ord};
  const auto l1 = level1_rank(ords, table, shard_, "f", 10);
  ASSERT_EQ(l1.kept.size(), 1u);
  EXPECT_NEAR(l1.kept[0].l1_distance, 0.0, 1e-6);
}

TEST(MergeTest, KeepsGlobalTopAndDropsIncompleteShards) {
  std::vector<ShardResponse> rs(3);
  rs[0].candidates = {{10, 0.5f}, {11, 2.0f}};
  rs[1].candidates = {{4, 0.5f}, {12, 1.0f}};
  rs[2].candidates = {{1, 0.1f}};
  rs[2].complete = false;
  const auto merged = merge_candidates(rs, 3);
  ASSERT_EQ(merged.size(), 3u);
  EXPECT_EQ(merged[0].doc_id, 4u);
  EXPECT_EQ(merged[1].doc_id, 10u);
  EXPECT_EQ(merged[2].doc_id, 12u);
}

TEST(DedupTest, EqualDigestsCollapse) {
  std::vector<DedupKey> keys(2);
  keys[0].digest = md5("same");
  keys[1].digest = md5("same");
  keys[0].phash = 0;
  keys[1].phash = ~0ULL;
  EXPECT_EQ(dedup_survivors(keys), (std::vector<std::size_t>{0}));
}

TEST(DedupTest, PhashJustAboveThresholdSurvives) {
  std::vector<DedupKey> keys(2);
  keys[0].phash = 0;
  keys[1].phash = 0x7f;  // 7 bits
  EXPECT_EQ(dedup_survivors(keys, 6).size(), 2u);
  EXPECT_EQ(dedup_survivors(keys, 7).size(), 1u);
}

// Components of the duplicate graph by depth-first search.
std::vector<std::size_t> oracle_survivors(const std::vector<DedupKey>& keys, int t) {
  const std::size_t n = keys.size();
  auto linked = [&](std::size_t a, std::size_t b) {
    if (keys[a].digest && keys[b].digest && *keys[a].digest == *keys[b].digest) return true;
    return keys[a].phash && keys[b].phash &&
           std::popcount(*keys[a].phash ^ *keys[b].phash) <= t;
  };
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> survivors;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    survivors.push_back(s);
    std::vector<std::size_t> stack = {s};
    comp[s] = static_cast<int>(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        if (comp[v] < 0 && linked(u, v)) {
          comp[v] = static_cast<int>(s);
          stack.push_back(v);
        }
      }
    }
  }
  return survivors;
}

TEST(DedupTest, PlantedClustersMatchUnionFindOracle) {
  testing::SplitMix64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DedupKey> keys;
    std::vector<std::uint64_t> bases;
    for (int c = 0; c < 12; ++c) bases.push_back(rng.next());
    for (int i = 0; i < 50; ++i) {
      DedupKey k;
      const auto base = bases[rng.next() % bases.size()];
      std::uint64_t ph = base;
      const int flips = static_cast<int>(rng.next() % 5);
      for (int f = 0; f < flips; ++f) ph ^= 1ULL << (rng.next() % 64);
      if (rng.next() % 10 != 0) k.phash = ph;
      if (rng.next() % 4 == 0) k.digest = md5(std::to_string(rng.next() % 6));
      keys.push_back(k);
    }
    ASSERT_EQ(dedup_survivors(keys, 6), oracle_survivors(keys, 6)) << "trial " << trial;
  }
}

}  // namespace
}  // namespace viscade::retrieve
