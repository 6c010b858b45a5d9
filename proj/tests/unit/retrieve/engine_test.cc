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

#include "viscade/retrieve/engine.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <thread>

#include "support/fixtures.h"
#include "viscade/core/error.h"

namespace viscade::retrieve {
namespace {

using testing::small_build_config;
using testing::small_spec;

class EngineFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new app::SyntheticWorld(small_spec(20, 60, 5));
    corpus_ = new app::SyntheticCorpus(world_->corpus());
    queries_ = new app::SyntheticCorpus(world_->queries(120, 17));
    auto cfg = small_build_config();
    models_ = new index::IndexModels(index::train_index_models(corpus_->docs, cfg));
    for (std::uint32_t k : {1u, 2u, 8u}) {
      cfg.shards = k;
      indexes_[k] = std::make_shared<const index::Index>(
          index::Index::build(corpus_->docs, *models_, cfg));
    }
  }
  static void TearDownTestSuite() {
    indexes_.clear();
    delete models_;
    delete queries_;
    delete corpus_;
    delete world_;
  }

  static Query query_for(const feature::FeatureBundle& f, std::size_t top_k = 10) {
    Query q;
    q.features = f;
    q.top_k = top_k;
    q.cascade.l1_keep = 100;
    return q;
  }

  static app::SyntheticWorld* world_;
  static app::SyntheticCorpus* corpus_;
  static app::SyntheticCorpus* queries_;
  static index::IndexModels* models_;
  static std::map<std::uint32_t, std::shared_ptr<const index::Index>> indexes_;
};

app::SyntheticWorld* EngineFixture::world_ = nullptr;
app::SyntheticCorpus* EngineFixture::corpus_ = nullptr;
app::SyntheticCorpus* EngineFixture::queries_ = nullptr;
index::IndexModels* EngineFixture::models_ = nullptr;
std::map<std::uint32_t, std::shared_ptr<const index::Index>> EngineFixture::indexes_;

TEST_F(EngineFixture, SelfRetrievalRanksFirst) {
  SearchEngine engine(indexes_[2]);
  const auto& q = models_->quantizer("emb");
  for (std::size_t i = 0; i < corpus_->docs.size(); i += 37) {
    const auto& doc = corpus_->docs[i];
    const auto resp = engine.search(query_for(doc.features, 1));
    ASSERT_EQ(resp.results.size(), 1u);
    EXPECT_EQ(resp.results[0].doc_id, doc.image_id);
    const auto reduced = q.reduce(*doc.features.embedding("emb"));
    const auto recon = quantize::pq_decode(q.pq, quantize::pq_encode(q.pq, reduced));
    double own = 0.0;
    for (std::size_t j = 0; j < reduced.size(); ++j) {
      own += (reduced[j] - recon[j]) * (reduced[j] - recon[j]);
    }
    EXPECT_NEAR(resp.results[0].l1_distance, own, 1e-4 * std::max(1.0, own));
  }
}

TEST_F(EngineFixture, ContainmentChainAndMonotoneOrder) {
  SearchEngine engine(indexes_[1]);
  for (const auto& qd : queries_->docs) {
    auto query = query_for(qd.features, 10);
    query.trace = true;
    const auto resp = engine.search(query);
    const auto& d = resp.diagnostics;
    const auto& tr = *resp.trace;
    EXPECT_GE(d.l0_count, d.l1_count);
    EXPECT_GE(d.l1_count, d.final_count);
    EXPECT_EQ(d.l0_count, tr.l0_ids.size());
    const std::set<std::uint64_t> l0(tr.l0_ids.begin(), tr.l0_ids.end());
    const std::set<std::uint64_t> l1(tr.l1_ids.begin(), tr.l1_ids.end());
    for (auto id : tr.l1_ids) EXPECT_TRUE(l0.count(id));
    for (const auto& r : resp.results) EXPECT_TRUE(l1.count(r.doc_id));
    for (std::size_t i = 1; i < resp.results.size(); ++i) {
      EXPECT_GE(resp.results[i - 1].score, resp.results[i].score);
    }
  }
}

TEST_F(EngineFixture, PartitionTransparency) {
  SearchEngine e1(indexes_[1]);
  SearchEngine e2(indexes_[2]);
  SearchEngine e8(indexes_[8]);
  auto same = [](const SearchResponse& a, const SearchResponse& b) {
    if (a.results.size() != b.results.size()) return false;
    for (std::size_t i = 0; i < a.results.size(); ++i) {
      if (a.results[i].doc_id != b.results[i].doc_id ||
          a.results[i].score != b.results[i].score ||
          a.results[i].l1_distance != b.results[i].l1_distance) {
        return false;
      }
    }
    return a.diagnostics.l0_count == b.diagnostics.l0_count &&
           a.diagnostics.l1_count == b.diagnostics.l1_count;
  };
  for (const auto& qd : queries_->docs) {
    const auto query = query_for(qd.features, 10);
    const auto r1 = e1.search(query);
    EXPECT_TRUE(same(r1, e2.search(query)));
    EXPECT_TRUE(same(r1, e8.search(query)));
  }
}

TEST_F(EngineFixture, SingleShardEqualsDirectStages) {
  SearchEngine engine(indexes_[1]);
  const auto& shard = indexes_[1]->shards()[0];
  for (std::size_t i = 0; i < 20; ++i) {
    const auto query = query_for(queries_->docs[i].features);
    const auto prepared = engine.prepare(query.features, query.cascade);
    const auto responses = engine.scatter_gather(prepared, query);
    const auto ords = level0_ordinals(prepared.words, shard, 1);
    const auto direct = level1_rank(ords, prepared.table, shard, "emb", 100);
    ASSERT_EQ(responses.size(), 1u);
    EXPECT_EQ(responses[0].candidates, direct.kept);
    EXPECT_EQ(responses[0].l0_count, ords.size());
  }
}

TEST_F(EngineFixture, LateShardIsDroppedAndFlagged) {
  SearchEngine engine(indexes_[8]);
  engine.set_shard_hook([](std::uint32_t s) {
    if (s == 3) std::this_thread::sleep_for(std::chrono::milliseconds(600));
  });
  const auto& index = *indexes_[8];
  for (std::size_t i = 0; i < 3; ++i) {
    auto query = query_for(queries_->docs[i].features);
    query.deadline_ms = 250.0;
    query.trace = true;
    const auto resp = engine.search(query);
    EXPECT_TRUE(resp.diagnostics.partial);
    EXPECT_EQ(resp.diagnostics.shards_responded, 7u);

    const auto prepared = engine.prepare(query.features, query.cascade);
    std::vector<ShardResponse> expected;
    for (std::uint32_t s = 0; s < 8; ++s) {
      if (s == 3) continue;
      ShardResponse r;
      const auto ords = level0_ordinals(prepared.words, index.shards()[s], 1);
      r.candidates = level1_rank(ords, prepared.table, index.shards()[s], "emb", 100).kept;
      expected.push_back(r);
    }
    std::vector<std::uint64_t> ids;
    for (const auto& c : merge_candidates(expected, 100)) ids.push_back(c.doc_id);
    EXPECT_EQ(resp.trace->l1_ids, ids);
    for (const auto& r : resp.results) EXPECT_NE(index::shard_assign(r.doc_id, 8), 3u);
  }
}

TEST_F(EngineFixture, AllShardsLateIsAnError) {
  SearchEngine engine(indexes_[2]);
  engine.set_shard_hook(
      [](std::uint32_t) { std::this_thread::sleep_for(std::chrono::milliseconds(200)); });
  auto query = query_for(queries_->docs[0].features);
  query.deadline_ms = 10.0;
  try {
    engine.search(query);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAllShardsTimedOut);
  }
}

TEST_F(EngineFixture, NoSharedWordGivesEmptyResults) {
  auto cfg = small_build_config();
  const std::vector<index::ImageDoc> few(corpus_->docs.begin(), corpus_->docs.begin() + 2);
  SearchEngine engine(
      std::make_shared<const index::Index>(index::Index::build(few, *models_, cfg)));
  std::size_t empty = 0;
  for (const auto& qd : queries_->docs) {
    const auto resp = engine.search(query_for(qd.features));
    if (resp.diagnostics.l0_count == 0) {
      ++empty;
      EXPECT_TRUE(resp.results.empty());
      EXPECT_EQ(resp.diagnostics.l1_count, 0u);
    }
  }
  EXPECT_GT(empty, 0u);
}

// Monotone step function of the L1 distance: higher for closer candidates.
rank::RankingModel l1_staircase(const index::Index& index, std::vector<float> distances) {
  const auto& reg = index.registry();
  std::sort(distances.begin(), distances.end());
  distances.erase(std::unique(distances.begin(), distances.end()), distances.end());
  rank::RegressionTree tree;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const int node = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({static_cast<int>(reg.l1_slot()), distances[i], node + 1, node + 2, 0});
    tree.nodes.push_back({-1, 0.0f, -1, -1, -static_cast<double>(i)});
  }
  tree.nodes.push_back({-1, 0.0f, -1, -1, -static_cast<double>(distances.size())});
  rank::RankingModel model;
  model.trees = {tree};
  model.learning_rate = 1.0;
  model.feature_names = reg.names();
  model.registry_digest = reg.digest().hex();
  return model;
}

TEST_F(EngineFixture, L1StaircaseModelReproducesL1Order) {
  SearchEngine plain(indexes_[1]);
  for (std::size_t i = 0; i < 10; ++i) {
    auto query = query_for(queries_->docs[i].features, 100);
    query.dedup = false;
    query.trace = true;
    const auto prepared = plain.prepare(query.features, query.cascade);
    const auto merged = merge_candidates(plain.scatter_gather(prepared, query), 100);
    std::vector<float> dists;
    for (const auto& c : merged) dists.push_back(c.l1_distance);
    SearchEngine engine(indexes_[1], l1_staircase(*indexes_[1], dists));
    const auto resp = engine.search(query);
    std::vector<std::uint64_t> got;
    for (const auto& r : resp.results) got.push_back(r.doc_id);
    EXPECT_EQ(got, resp.trace->l1_ids);
  }
}

TEST_F(EngineFixture, ScoresMatchOfflineRows) {
  const auto& index = *indexes_[1];
  SearchEngine plain(indexes_[1]);
  rank::RankingDataset data;
  for (std::size_t q = 0; q < 20; ++q) {
    const auto& qd = queries_->docs[q];
    std::vector<std::uint64_t> ids;
    std::vector<int> labels;
    for (std::size_t i = q; i < corpus_->docs.size(); i += 53) {
      ids.push_back(corpus_->docs[i].image_id);
      labels.push_back(corpus_->hidden[i].cluster == queries_->hidden[q].cluster ? 2 : 0);
    }
    const auto rows = plain.feature_rows(qd.features, ids);
    Matrix m;
    for (const auto& r : rows) m.append_row(r);
    data.add_query(m, labels);
  }
  rank::LambdaMartConfig cfg;
  cfg.trees = 10;
  const auto model = rank::lambdamart_train(data, cfg, index.registry().names(),
                                            index.registry().digest().hex())
                         .model;
  SearchEngine engine(indexes_[1], model);
  auto query = query_for(queries_->docs[40].features, 200);
  query.cascade.l1_keep = 200;
  query.dedup = false;
  const auto resp = engine.search(query);
  ASSERT_GT(resp.results.size(), 50u);
  for (const auto& r : resp.results) {
    const std::vector<std::uint64_t> one = {r.doc_id};
    const auto row = engine.feature_rows(query.features, one)[0];
    EXPECT_NEAR(r.score, rank::model_score(model, row), 1e-6);
  }
}

TEST_F(EngineFixture, RejectsModelFromAnotherRegistry) {
  rank::RankingModel model = l1_staircase(*indexes_[1], {1.0f});
  model.registry_digest = std::string(32, '0');
  EXPECT_THROW(SearchEngine(indexes_[1], model), Error);
  model.feature_names.pop_back();
  model.registry_digest.clear();
  EXPECT_THROW(SearchEngine(indexes_[1], model), Error);
}

TEST_F(EngineFixture, RejectsBadQueries) {
  SearchEngine engine(indexes_[1]);
  auto query = query_for(queries_->docs[0].features, 10);
  query.cascade.l1_keep = 5;
  try {
    engine.search(query);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
  query = query_for({}, 10);
  try {
    engine.search(query);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedRequest);
  }
  query = query_for(queries_->docs[0].features, 0);
  EXPECT_THROW(engine.search(query), Error);
}

TEST_F(EngineFixture, DiagnosticsSerialize) {
  SearchEngine engine(indexes_[2]);
  const auto resp = engine.search(query_for(queries_->docs[1].features));
  const auto j = resp.diagnostics.to_json();
  for (const char* key : {"l0_count", "l1_count", "l2_count", "partial", "stage_latencies_ms"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["stage_latencies_ms"].contains("total"));
}

TEST(EngineDedupTest, PlantedDuplicatesCollapse) {
  auto spec = small_spec(10, 60, 9);
  spec.exact_dup_rate = 0.1;
  spec.near_dup_rate = 0.1;
  const app::SyntheticWorld world(spec);
  const auto corpus = world.corpus();
  const auto cfg = small_build_config();
  auto index = std::make_shared<const index::Index>(testing::build_index(corpus.docs, cfg));
  SearchEngine engine(index);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < corpus.docs.size() && checked < 10; ++i) {
    if (!corpus.hidden[i].duplicate_of) continue;
    ++checked;
    Query q;
    q.features = corpus.docs[i].features;
    q.top_k = 50;
    q.cascade.l1_keep = 200;
    q.dedup = false;
    const auto raw = engine.search(q);
    q.dedup = true;
    const auto deduped = engine.search(q);
    std::set<std::uint64_t> kept;
    for (const auto& r : deduped.results) kept.insert(r.doc_id);
    const std::uint64_t src = *corpus.hidden[i].duplicate_of;
    EXPECT_FALSE(kept.count(src) && kept.count(corpus.docs[i].image_id));
    EXPECT_LE(deduped.results.size(), raw.results.size());
    bool grouped = false;
    for (const auto& r : deduped.results) grouped |= r.duplicates > 0;
    EXPECT_TRUE(grouped);
  }
  EXPECT_EQ(checked, 10u);
}

TEST(EngineDedupTest, ExactDuplicatesTieAndBreakById) {
  auto spec = small_spec(10, 60, 9);
  spec.exact_dup_rate = 0.2;
  const app::SyntheticWorld world(spec);
  const auto corpus = world.corpus();
  auto index = std::make_shared<const index::Index>(
      testing::build_index(corpus.docs, small_build_config()));
  SearchEngine engine(index);
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    if (!corpus.hidden[i].duplicate_of) continue;
    Query q;
    q.features = corpus.docs[i].features;
    q.top_k = 2;
    q.dedup = false;
    q.cascade.l1_keep = 100;
    const auto resp = engine.search(q);
    ASSERT_EQ(resp.results.size(), 2u);
    EXPECT_EQ(resp.results[0].score, resp.results[1].score);
    EXPECT_LT(resp.results[0].doc_id, resp.results[1].doc_id);
    break;
  }
}

}  // namespace
}  // namespace viscade::retrieve
