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

#include "viscade/service/service.h"

#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "support/fixtures.h"
#include "viscade/core/binary_io.h"
#include "viscade/feature/extract.h"
#include "viscade/service/http.h"

namespace viscade::service {
namespace {

using nlohmann::json;

// Rendered pictures on disk, indexed through the default pixel pipeline.
class ServiceFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    const app::SyntheticWorld world(testing::small_spec(12, 20, 3));
    auto corpus = world.corpus();
    const auto pipeline = feature::PipelineConfig::defaults();
    for (auto& doc : corpus.docs) {
      const auto png = feature::encode_png(app::render_image(doc, 64, 48));
      const auto path = dir_->path() / (std::to_string(doc.image_id) + ".png");
      write_file_bytes(path, png);
      feature::ExtractInputs inputs;
      inputs.category = doc.category;
      inputs.metadata_text = doc.metadata_text;
      doc.features = feature::extract_features(png, std::nullopt, pipeline, inputs);
      doc.source_uri = path.string();
      docs_.push_back(doc);
    }
    auto cfg = testing::small_build_config(2);
    cfg.l1_family = pipeline.l1_family();
    index_ = std::make_shared<const index::Index>(testing::build_index(docs_, cfg));
  }
  static void TearDownTestSuite() {
    index_.reset();
    docs_.clear();
    delete dir_;
  }

  static std::shared_ptr<SearchService> make_service(std::size_t capacity = 4) {
    ServiceConfig cfg;
    cfg.cache_capacity = capacity;
    cfg.l1_keep = 100;
    auto engine = std::make_shared<const retrieve::SearchEngine>(index_);
    return std::make_shared<SearchService>(engine, feature::PipelineConfig::defaults(), cfg);
  }

  static std::string png_of(std::size_t i) {
    const auto bytes = read_file_bytes(docs_[i].source_uri);
    return std::string(bytes.begin(), bytes.end());
  }

  static std::vector<std::uint64_t> ids_of(const json& body) {
    std::vector<std::uint64_t> ids;
    for (const auto& r : body["results"]) ids.push_back(r["doc_id"].get<std::uint64_t>());
    return ids;
  }

  static testing::TempDir* dir_;
  static std::vector<index::ImageDoc> docs_;
  static std::shared_ptr<const index::Index> index_;
};

testing::TempDir* ServiceFixture::dir_ = nullptr;
std::vector<index::ImageDoc> ServiceFixture::docs_;
std::shared_ptr<const index::Index> ServiceFixture::index_;

TEST_F(ServiceFixture, ImageIdQueryReturnsItselfFirst) {
  auto svc = make_service();
  for (std::size_t i = 0; i < docs_.size(); i += 31) {
    const auto reply = svc->handle_search_json(
        json{{"image_id", docs_[i].image_id}, {"top_k", 3}}.dump());
    ASSERT_EQ(reply.status, 200) << reply.body;
    const auto body = json::parse(reply.body);
    EXPECT_EQ(body["version"], kResponseVersion);
    // Exact ties (identical histograms) fall back to the lower id.
    bool found = false;
    for (const auto& r : body["results"]) {
      found |= r["doc_id"] == docs_[i].image_id && r["score"] == body["results"][0]["score"];
    }
    EXPECT_TRUE(found) << body["results"].dump();
    EXPECT_FALSE(body["cache_hit"].get<bool>());
    EXPECT_TRUE(body["diagnostics"].contains("l0_count"));
  }
}

TEST_F(ServiceFixture, ErrorStatuses) {
  auto svc = make_service();
  EXPECT_EQ(svc->handle_search_json("{not json").status, 400);
  EXPECT_EQ(svc->handle_search_json("[]").status, 400);
  EXPECT_EQ(svc->handle_search_json("{}").status, 400);
  EXPECT_EQ(svc->handle_search_json(json{{"image_id", 1}, {"embedding", {1.0}}}.dump()).status, 400);
  EXPECT_EQ(svc->handle_search_json(json{{"image_id", 987654321}}.dump()).status, 404);
  EXPECT_EQ(svc->handle_search_json(json{{"image_id", "abc"}}.dump()).status, 400);
  EXPECT_EQ(svc->handle_search_json(json{{"embedding", {1.0, 2.0}}}.dump()).status, 400);
  EXPECT_EQ(svc->handle_search_json(
                json{{"image_id", docs_[0].image_id}, {"top_k", 0}}.dump()).status,
            400);
  EXPECT_EQ(svc->handle_search_upload("definitely not an image", {}).status, 422);
  EXPECT_EQ(svc->handle_doc("987654321").status, 404);
  EXPECT_EQ(svc->handle_doc("x1").status, 400);
  const auto err = json::parse(svc->handle_search_json("{}").body);
  EXPECT_EQ(err["error"]["code"], "malformed_request");
}

TEST_F(ServiceFixture, AllShardsLateIs504) {
  auto engine = std::make_shared<retrieve::SearchEngine>(index_);
  engine->set_shard_hook(
      [](std::uint32_t) { std::this_thread::sleep_for(std::chrono::milliseconds(150)); });
  ServiceConfig cfg;
  cfg.l1_keep = 100;
  SearchService svc(engine, feature::PipelineConfig::defaults(), cfg);
  const auto reply = svc.handle_search_json(
      json{{"image_id", docs_[0].image_id}, {"deadline_ms", 5}}.dump());
  EXPECT_EQ(reply.status, 504);
}

TEST_F(ServiceFixture, RepeatedUploadHitsCacheWithSameResults) {
  auto svc = make_service();
  const auto first = svc->handle_search_upload(png_of(5), {});
  ASSERT_EQ(first.status, 200) << first.body;
  const auto second = svc->handle_search_upload(png_of(5), {});
  const auto a = json::parse(first.body);
  const auto b = json::parse(second.body);
  EXPECT_FALSE(a["cache_hit"].get<bool>());
  EXPECT_TRUE(b["cache_hit"].get<bool>());
  EXPECT_EQ(a["results"], b["results"]);
  EXPECT_EQ(ids_of(a)[0], docs_[5].image_id);
}

TEST_F(ServiceFixture, CropsGetTheirOwnKeysAndMatchDirectRuns) {
  auto svc = make_service();
  const feature::CropRect crop{0.1, 0.2, 0.7, 0.9};
  const auto digest = md5(png_of(7));
  EXPECT_NE(svc->cache_key(digest, std::nullopt), svc->cache_key(digest, crop));
  EXPECT_NE(svc->cache_key(digest, crop),
            svc->cache_key(digest, feature::CropRect{0.1, 0.2, 0.7, 0.8}));

  UploadFields fields;
  fields.crop = crop;
  const auto full = json::parse(svc->handle_search_upload(png_of(7), {}).body);
  const auto cropped = json::parse(svc->handle_search_upload(png_of(7), fields).body);
  EXPECT_FALSE(cropped["cache_hit"].get<bool>());
  EXPECT_EQ(svc->cache_size(), 2u);

  const auto bytes = read_file_bytes(docs_[7].source_uri);
  for (const auto& [c, body] : {std::pair{std::optional<feature::CropRect>{}, full},
                                std::pair{std::optional<feature::CropRect>{crop}, cropped}}) {
    retrieve::Query q;
    q.features = feature::extract_features(bytes, c, svc->pipeline());
    q.top_k = 20;
    q.cascade.l1_keep = 100;
    const auto direct = svc->engine().search(q);
    std::vector<std::uint64_t> ids;
    for (const auto& r : direct.results) ids.push_back(r.doc_id);
    EXPECT_EQ(ids_of(body), ids);
  }
}

TEST_F(ServiceFixture, FullImageCropEqualsNoCrop) {
  auto svc = make_service();
  UploadFields fields;
  fields.crop = feature::CropRect{0.0, 0.0, 1.0, 1.0};
  const auto a = json::parse(svc->handle_search_upload(png_of(9), {}).body);
  const auto b = json::parse(svc->handle_search_upload(png_of(9), fields).body);
  EXPECT_EQ(a["results"], b["results"]);
}

TEST_F(ServiceFixture, CropOnIndexedImageUsesItsPixels) {
  auto svc = make_service();
  const auto reply = svc->handle_search_json(
      json{{"image_id", docs_[3].image_id},
           {"crop", {{"x0", 0.0}, {"y0", 0.0}, {"x1", 1.0}, {"y1", 1.0}}}}.dump());
  ASSERT_EQ(reply.status, 200) << reply.body;
  EXPECT_EQ(json::parse(reply.body)["results"][0]["doc_id"], docs_[3].image_id);
  const auto tiny = svc->handle_search_json(
      json{{"image_id", docs_[3].image_id},
           {"crop", {{"x0", 0.0}, {"y0", 0.0}, {"x1", 0.01}, {"y1", 0.01}}}}.dump());
  EXPECT_EQ(tiny.status, 400);
}

TEST_F(ServiceFixture, HealthReportsCacheOccupancy) {
  auto svc = make_service(3);
  auto occupancy = [&] { return json::parse(svc->handle_health().body)["cache"]["size"].get<int>(); };
  EXPECT_EQ(occupancy(), 0);
  svc->handle_search_upload(png_of(0), {});
  EXPECT_EQ(occupancy(), 1);
  for (std::size_t i = 1; i <= 3; ++i) svc->handle_search_upload(png_of(i), {});
  EXPECT_EQ(occupancy(), 3);
  const auto h = json::parse(svc->handle_health().body);
  EXPECT_EQ(h["doc_count"], docs_.size());
  EXPECT_EQ(h["shards"], 2);
  EXPECT_TRUE(h["model_digests"].contains("vw.bin"));
}

TEST_F(ServiceFixture, IdenticalRequestsGiveIdenticalResults) {
  auto svc = make_service();
  const std::string req = json{{"image_id", docs_[11].image_id}, {"top_k", 10}}.dump();
  auto a = json::parse(svc->handle_search_json(req).body);
  auto b = json::parse(svc->handle_search_json(req).body);
  a["diagnostics"].erase("stage_latencies_ms");
  b["diagnostics"].erase("stage_latencies_ms");
  EXPECT_EQ(a, b);
}

TEST_F(ServiceFixture, EmbeddingQueryAndDocLookup) {
  auto svc = make_service();
  const auto& emb = *docs_[2].features.embedding("color_hist");
  const auto reply = svc->handle_search_json(json{{"embedding", emb}, {"top_k", 1}}.dump());
  ASSERT_EQ(reply.status, 200) << reply.body;
  EXPECT_EQ(json::parse(reply.body)["results"][0]["doc_id"], docs_[2].image_id);
  const auto doc = json::parse(svc->handle_doc(std::to_string(docs_[2].image_id)).body);
  EXPECT_EQ(doc["metadata_text"], docs_[2].metadata_text);
  EXPECT_TRUE(doc["has_image"].get<bool>());
  const auto img = svc->handle_image(std::to_string(docs_[2].image_id));
  EXPECT_EQ(img.status, 200);
  EXPECT_EQ(img.content_type, "image/png");
  EXPECT_EQ(img.body, png_of(2));
}

TEST_F(ServiceFixture, HttpEndToEnd) {
  HttpServer server(make_service());
  const int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  auto by_id = client.Post("/v1/search", json{{"image_id", docs_[4].image_id}}.dump(),
                           "application/json");
  ASSERT_TRUE(by_id);
  EXPECT_EQ(by_id->status, 200);
  EXPECT_EQ(json::parse(by_id->body)["results"][0]["doc_id"], docs_[4].image_id);

  httplib::MultipartFormDataItems items = {
      {"image", png_of(6), "q.png", "image/png"},
      {"crop", R"({"x0":0,"y0":0,"x1":1,"y1":1})", "", ""},
      {"top_k", "5", "", ""}};
  auto upload = client.Post("/v1/search", items);
  ASSERT_TRUE(upload);
  EXPECT_EQ(upload->status, 200) << upload->body;
  const auto up = json::parse(upload->body);
  EXPECT_EQ(up["results"].size(), 5u);
  EXPECT_EQ(up["results"][0]["doc_id"], docs_[6].image_id);

  auto bad = client.Post("/v1/search", "junk", "image/png");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);

  auto missing = client.Get("/v1/doc/424242");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  auto image = client.Get(("/v1/image/" + std::to_string(docs_[6].image_id)).c_str());
  ASSERT_TRUE(image);
  EXPECT_EQ(image->status, 200);
  EXPECT_EQ(image->body, png_of(6));

  auto preflight = client.Options("/v1/search");
  ASSERT_TRUE(preflight);
  EXPECT_EQ(preflight->status, 204);
  server.stop();
}

TEST(ServiceConfigTest, EnvironmentOverridesFile) {
  auto kv = KvConfig::parse("service.addr = 0.0.0.0:9000\nservice.index = /a\n");
  auto cfg = ServiceConfig::from_kv(kv);
  EXPECT_EQ(cfg.host, "0.0.0.0");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_EQ(cfg.index_path, "/a");
  setenv("SERVICE_ADDR", "127.0.0.1:7001", 1);
  setenv("INDEX_PATH", "/b", 1);
  cfg = ServiceConfig::from_kv(kv);
  unsetenv("SERVICE_ADDR");
  unsetenv("INDEX_PATH");
  EXPECT_EQ(cfg.port, 7001);
  EXPECT_EQ(cfg.index_path, "/b");
  EXPECT_THROW(ServiceConfig::from_kv(KvConfig::parse("service.addr = nope\n")), Error);
}

}  // namespace
}  // namespace viscade::service
