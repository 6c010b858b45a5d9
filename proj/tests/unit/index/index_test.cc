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

#include "viscade/index/index.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "support/fixtures.h"
#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::index {
namespace {

using testing::build_index;
using testing::small_build_config;
using testing::small_spec;
using testing::TempDir;

template <typename Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

TEST(ShardAssignTest, SingleShardIsAlwaysZero) {
  for (std::uint64_t id = 0; id < 1000; ++id) EXPECT_EQ(shard_assign(id * 7919, 1), 0u);
}

TEST(ShardAssignTest, SequentialIdsSpreadEvenly) {
  std::vector<std::size_t> load(8, 0);
  for (std::uint64_t id = 1; id <= 100000; ++id) ++load[shard_assign(id, 8)];
  const double mean = 100000.0 / 8;
  const double skew = *std::max_element(load.begin(), load.end()) / mean;
  RecordProperty("max_over_mean", std::to_string(skew));
  EXPECT_LE(skew, 1.15);
}

TEST(ShardAssignTest, Deterministic) {
  EXPECT_EQ(shard_assign(123456789, 8), shard_assign(123456789, 8));
  EXPECT_EQ(shard_assign(42, 5), static_cast<std::uint32_t>(fnv1a64_u64(42) % 5));
}

class IndexFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new app::SyntheticCorpus(app::SyntheticWorld(small_spec(20, 50)).corpus());
  }
  static void TearDownTestSuite() {
    delete corpus_;
    corpus_ = nullptr;
  }
  static std::span<const ImageDoc> docs() { return corpus_->docs; }

  static app::SyntheticCorpus* corpus_;
};

app::SyntheticCorpus* IndexFixture::corpus_ = nullptr;

TEST_F(IndexFixture, EmptyBuildGivesEmptyShards) {
  const auto cfg = small_build_config(3);
  auto models = train_index_models(docs(), cfg);
  const auto index = Index::build({}, models, cfg);
  EXPECT_EQ(index.doc_count(), 0u);
  ASSERT_EQ(index.shards().size(), 3u);
  for (const auto& s : index.shards()) {
    EXPECT_EQ(s.doc_count(), 0u);
    EXPECT_EQ(s.posting_count(), 0u);
  }
  TempDir dir;
  index.save(dir.path());
  EXPECT_EQ(Index::load(dir.path()).doc_count(), 0u);
}

TEST_F(IndexFixture, SingleDocLandsInExactlyOneShard) {
  const auto cfg = small_build_config(4);
  auto models = train_index_models(docs(), cfg);
  const auto index = Index::build(docs().subspan(0, 1), models, cfg);
  std::size_t holders = 0;
  for (const auto& s : index.shards()) {
    if (s.doc_count() == 1) ++holders;
    else EXPECT_EQ(s.doc_count(), 0u);
  }
  EXPECT_EQ(holders, 1u);
  const auto loc = index.locate(docs()[0].image_id);
  ASSERT_TRUE(loc.has_value());
  EXPECT_EQ(loc->shard, shard_assign(docs()[0].image_id, 4));
}

TEST_F(IndexFixture, EveryDocInExactlyBooksManyPostings) {
  const auto cfg = small_build_config(3);
  const auto index = build_index(docs(), cfg);
  std::size_t total = 0;
  for (const auto& shard : index.shards()) {
    total += shard.doc_count();
    std::vector<std::size_t> seen(shard.doc_count(), 0);
    std::size_t entries = 0;
    for (auto word : shard.words()) {
      const auto list = shard.postings(word);
      EXPECT_TRUE(std::is_sorted(list.doc_ids.begin(), list.doc_ids.end()));
      EXPECT_EQ(std::adjacent_find(list.doc_ids.begin(), list.doc_ids.end()),
                list.doc_ids.end());
      shard.for_each_posting(word, [&](std::size_t ord) {
        ++seen[ord];
        ++entries;
      });
    }
    EXPECT_EQ(entries, shard.posting_count());
    for (auto c : seen) EXPECT_EQ(c, cfg.vw_books);
  }
  EXPECT_EQ(total, docs().size());
}

TEST_F(IndexFixture, PostingsMatchRecomputedWords) {
  const auto index = build_index(docs(), small_build_config(2));
  const auto& models = index.models();
  for (std::size_t i = 0; i < docs().size(); i += 97) {
    const auto& doc = docs()[i];
    const auto reduced = models.quantizer("emb").reduce(*doc.features.embedding("emb"));
    const auto words = models.words_for(reduced);
    const auto loc = index.locate(doc.image_id);
    ASSERT_TRUE(loc.has_value());
    for (std::size_t b = 0; b < words.size(); ++b) {
      const auto list = index.shards()[loc->shard].postings(words.word(b));
      EXPECT_TRUE(std::binary_search(list.doc_ids.begin(), list.doc_ids.end(), doc.image_id));
    }
  }
  EXPECT_TRUE(index.shards()[0].postings(0xffffffffu).doc_ids.empty());
}

TEST_F(IndexFixture, StoredBundleKeepsMetadataAndRawVectors) {
  const auto index = build_index(docs(), small_build_config(2));
  const auto& doc = docs()[17];
  const auto stored = index.stored_bundle(doc.image_id);
  ASSERT_TRUE(stored.has_value());
  EXPECT_EQ(stored->embeddings, doc.features.embeddings);
  EXPECT_EQ(stored->phash, doc.features.phash);
  EXPECT_EQ(stored->digest, doc.features.digest);
  EXPECT_EQ(stored->category, doc.features.category);
  EXPECT_EQ(stored->metadata_text, doc.features.metadata_text);
  EXPECT_FALSE(index.stored_bundle(999999999).has_value());
}

TEST_F(IndexFixture, DuplicateIdIsABuildError) {
  std::vector<ImageDoc> dup(docs().begin(), docs().begin() + 30);
  dup.push_back(dup[4]);
  const auto cfg = small_build_config();
  auto models = train_index_models(docs(), cfg);
  try {
    Index::build(dup, models, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBuild);
    EXPECT_NE(std::string(e.what()).find(std::to_string(dup[4].image_id)), std::string::npos);
  }
}

TEST_F(IndexFixture, UnknownFamilyIsAConfigError) {
  auto cfg = small_build_config();
  auto models = train_index_models(docs(), cfg);
  cfg.l2_families = {"emb", "missing"};
  EXPECT_EQ(error_code_of([&] { Index::build(docs(), models, cfg); }), ErrorCode::kConfig);
}

TEST_F(IndexFixture, RoundTripIsBitExact) {
  const auto index = build_index(docs(), small_build_config(3));
  TempDir dir;
  const auto written = index.save(dir.path());
  const auto loaded = Index::load(dir.path());
  EXPECT_EQ(loaded.manifest().to_json(), written.to_json());
  ASSERT_EQ(loaded.shards().size(), index.shards().size());
  for (std::size_t s = 0; s < index.shards().size(); ++s) {
    EXPECT_EQ(loaded.shards()[s].serialize(), index.shards()[s].serialize());
  }
  EXPECT_EQ(loaded.text_stats(), index.text_stats());
  EXPECT_EQ(loaded.registry().digest(), index.registry().digest());
}

TEST_F(IndexFixture, TruncatedPostingsAreRefused) {
  const auto index = build_index(docs(), small_build_config(2));
  TempDir dir;
  index.save(dir.path());
  const auto path = dir.path() / "shard_1.postings";
  auto bytes = read_file_bytes(path);
  bytes.resize(bytes.size() - 9);
  write_file_bytes(path, bytes);
  try {
    Index::load(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
    EXPECT_NE(std::string(e.what()).find("shard 1"), std::string::npos) << e.what();
  }
}

TEST_F(IndexFixture, SwappedCodebookIsRefused) {
  auto cfg = small_build_config();
  const auto index = build_index(docs(), cfg);
  TempDir dir;
  index.save(dir.path());
  cfg.seed = 99;
  auto other = train_index_models(docs(), cfg);
  TempDir other_dir;
  other.save(other_dir.path());
  std::filesystem::copy_file(other_dir.path() / "pq.emb.bin",
                             dir.path() / "models" / "pq.emb.bin",
                             std::filesystem::copy_options::overwrite_existing);
  EXPECT_EQ(error_code_of([&] { Index::load(dir.path()); }), ErrorCode::kIntegrity);
}

TEST_F(IndexFixture, ShardChecksumCatchesBitFlips) {
  const auto index = build_index(docs(), small_build_config());
  auto files = index.shards()[0].serialize();
  auto& meta = files.at("meta");
  meta[meta.size() / 2] ^= 0x10;
  EXPECT_EQ(error_code_of([&] { Shard::deserialize(0, files); }), ErrorCode::kIntegrity);
}

TEST(IndexScaleTest, TenThousandDocsAllResolve) {
  auto spec = small_spec(100, 100, 11);
  const auto corpus = app::SyntheticWorld(spec).corpus();
  auto cfg = small_build_config(8);
  cfg.vw_vocab = 64;
  cfg.pq_k = 64;
  const auto index = build_index(corpus.docs, cfg);
  std::size_t total = 0;
  std::set<std::uint64_t> resolved;
  for (const auto& shard : index.shards()) {
    total += shard.doc_count();
    for (auto word : shard.words()) {
      shard.for_each_posting(word, [&](std::size_t ord) {
        resolved.insert(shard.meta(ord).image_id);
      });
    }
  }
  EXPECT_EQ(total, 10000u);
  EXPECT_EQ(index.doc_count(), 10000u);
  EXPECT_EQ(resolved.size(), 10000u);
  for (const auto& doc : corpus.docs) ASSERT_TRUE(resolved.count(doc.image_id));
}

}  // namespace
}  // namespace viscade::index
