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

#ifndef VISCADE_SERVICE_SERVICE_H_
#define VISCADE_SERVICE_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "viscade/core/error.h"
#include "viscade/core/kv_config.h"
#include "viscade/feature/extract.h"
#include "viscade/feature/image.h"
#include "viscade/feature/pipeline.h"
#include "viscade/retrieve/engine.h"
#include "viscade/service/lru_cache.h"

namespace viscade::service {

inline constexpr int kResponseVersion = 1;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path index_path;
  std::filesystem::path pipeline_path;  // empty: <index>/pipeline.conf when present
  std::filesystem::path ranker_path;    // empty: <index>/models/ranker.json when present
  std::size_t cache_capacity = 256;
  double default_deadline_ms = 0.0;  // 0 disables the deadline
  std::size_t default_top_k = 20;
  std::size_t l1_keep = 1000;
  std::size_t m_match = 1;

  // Keys: service.addr (host:port), service.index, service.pipeline,
  // service.ranker, service.cache_capacity, service.deadline_ms,
  // service.top_k, cascade.l1_keep, cascade.m_match. SERVICE_ADDR and
  // INDEX_PATH override the file.
  static ServiceConfig from_kv(KvConfig kv);
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

int http_status_for(ErrorCode code);
HttpReply error_reply(ErrorCode code, const std::string& message);

// Fields of a multipart upload other than the image bytes.
struct UploadFields {
  std::optional<feature::CropRect> crop;
  std::optional<std::size_t> top_k;
  std::optional<double> deadline_ms;
  std::optional<bool> exact_l2;
  std::optional<std::string> metadata_text;
  std::optional<std::string> category;
};

// Crop from a JSON object {x0,y0,x1,y1}. Throws kMalformedRequest.
feature::CropRect parse_crop(const nlohmann::json& j);

class SearchService {
 public:
  SearchService(std::shared_ptr<const retrieve::SearchEngine> engine,
                feature::PipelineConfig pipeline, ServiceConfig config);

  // Loads the index, ranker and pipeline named by the config.
  static std::unique_ptr<SearchService> open(const ServiceConfig& config);

  // JSON body with exactly one of image_id or embedding.
  HttpReply handle_search_json(const std::string& body) const;
  HttpReply handle_search_upload(const std::string& image_bytes, const UploadFields& fields) const;
  HttpReply handle_health() const;
  HttpReply handle_doc(const std::string& id_text) const;
  // Bytes of the doc's source image when it is a readable local file.
  HttpReply handle_image(const std::string& id_text) const;

  // Cache key for an upload: content digest, crop, pipeline digest.
  std::string cache_key(const Digest128& content, const std::optional<feature::CropRect>& crop) const;
  std::size_t cache_size() const { return cache_.size(); }
  const retrieve::SearchEngine& engine() const { return *engine_; }
  const feature::PipelineConfig& pipeline() const { return pipeline_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct Request {
    feature::FeatureBundle features;
    std::size_t top_k = 0;
    std::optional<double> deadline_ms;
    bool exact_l2 = true;
    bool cache_hit = false;
  };

  feature::FeatureBundle features_for_upload(std::span<const std::uint8_t> bytes,
                                             const std::optional<feature::CropRect>& crop,
                                             const feature::ExtractInputs& inputs,
                                             bool* cache_hit) const;
  HttpReply run(const Request& request) const;

  std::shared_ptr<const retrieve::SearchEngine> engine_;
  feature::PipelineConfig pipeline_;
  ServiceConfig config_;
  mutable LruCache<feature::FeatureBundle> cache_;
};

nlohmann::json response_json(const retrieve::SearchResponse& response, bool cache_hit);

}  // namespace viscade::service

#endif  // VISCADE_SERVICE_SERVICE_H_
