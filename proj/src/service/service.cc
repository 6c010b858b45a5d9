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

#include <spdlog/spdlog.h>

#include <charconv>
#include <fstream>

#include "viscade/core/binary_io.h"
#include "viscade/rank/lambdamart.h"

namespace viscade::service {
namespace {

std::uint64_t parse_id(const std::string& text) {
  std::uint64_t id = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, id);
  require(ec == std::errc() && ptr == end && !text.empty(), ErrorCode::kMalformedRequest,
          "image id '" + text + "' is not an unsigned integer");
  return id;
}

std::uint64_t id_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_string()) return parse_id(j.get<std::string>());
  throw_error(ErrorCode::kMalformedRequest, "image_id must be an unsigned integer or a string");
}

std::optional<std::filesystem::path> local_source(const std::string& uri) {
  std::string path = uri;
  if (path.rfind("file://", 0) == 0) path = path.substr(7);
  if (path.empty() || path.find("://") != std::string::npos) return std::nullopt;
  if (!std::filesystem::is_regular_file(path)) return std::nullopt;
  return std::filesystem::path(path);
}

std::string image_content_type(std::span<const std::uint8_t> b) {
  if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G') {
    return "image/png";
  }
  if (b.size() >= 3 && b[0] == 0xff && b[1] == 0xd8 && b[2] == 0xff) return "image/jpeg";
  if (b.size() >= 2 && b[0] == 'P' && b[1] == '6') return "image/x-portable-pixmap";
  return "application/octet-stream";
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw_error(ErrorCode::kMalformedRequest, std::string("field '") + key + "' has the wrong type");
  }
}

std::vector<float> float_vector(const nlohmann::json& j, const std::string& what) {
  require(j.is_array(), ErrorCode::kMalformedRequest, what + " must be an array of numbers");
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    require(x.is_number(), ErrorCode::kMalformedRequest, what + " must be an array of numbers");
    v.push_back(x.get<float>());
  }
  return v;
}

}  // namespace

ServiceConfig ServiceConfig::from_kv(KvConfig kv) {
  kv.apply_env("SERVICE_ADDR", "service.addr");
  kv.apply_env("INDEX_PATH", "service.index");
  ServiceConfig c;
  if (auto addr = kv.get("service.addr")) {
    const auto colon = addr->rfind(':');
    require(colon != std::string::npos, ErrorCode::kConfig,
            "service.addr must be host:port, got '" + *addr + "'");
    c.host = addr->substr(0, colon);
    int port = 0;
    const std::string p = addr->substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
    require(ec == std::errc() && ptr == p.data() + p.size() && port >= 0 && port < 65536,
            ErrorCode::kConfig, "service.addr has an invalid port '" + p + "'");
    c.port = port;
  }
  c.index_path = kv.get_string("service.index", "");
  c.pipeline_path = kv.get_string("service.pipeline", "");
  c.ranker_path = kv.get_string("service.ranker", "");
  c.cache_capacity = static_cast<std::size_t>(
      kv.get_int("service.cache_capacity", static_cast<long long>(c.cache_capacity)));
  c.default_deadline_ms = kv.get_double("service.deadline_ms", c.default_deadline_ms);
  c.default_top_k =
      static_cast<std::size_t>(kv.get_int("service.top_k", static_cast<long long>(c.default_top_k)));
  c.l1_keep =
      static_cast<std::size_t>(kv.get_int("cascade.l1_keep", static_cast<long long>(c.l1_keep)));
  c.m_match =
      static_cast<std::size_t>(kv.get_int("cascade.m_match", static_cast<long long>(c.m_match)));
  require(c.cache_capacity >= 1, ErrorCode::kConfig, "service.cache_capacity must be >= 1");
  require(c.default_top_k >= 1, ErrorCode::kConfig, "service.top_k must be >= 1");
  return c;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRequest:
    case ErrorCode::kInvalidCrop:
    case ErrorCode::kDimMismatch:
    case ErrorCode::kConfig:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kDecode:
      return 422;
    case ErrorCode::kAllShardsTimedOut:
      return 504;
    default:
      return 500;
  }
}

HttpReply error_reply(ErrorCode code, const std::string& message) {
  nlohmann::json j = {{"version", kResponseVersion},
                      {"error", {{"code", std::string(error_code_name(code))}, {"message", message}}}};
  return {http_status_for(code), j.dump()};
}

feature::CropRect parse_crop(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kMalformedRequest, "crop must be an object {x0,y0,x1,y1}");
  feature::CropRect c;
  double* fields[] = {&c.x0, &c.y0, &c.x1, &c.y1};
  const char* names[] = {"x0", "y0", "x1", "y1"};
  for (int i = 0; i < 4; ++i) {
    require(j.contains(names[i]) && j[names[i]].is_number(), ErrorCode::kMalformedRequest,
            std::string("crop.") + names[i] + " must be a number");
    *fields[i] = j[names[i]].get<double>();
  }
  return c;
}

nlohmann::json response_json(const retrieve::SearchResponse& response, bool cache_hit) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : response.results) {
    nlohmann::json item = {{"doc_id", r.doc_id},
                           {"score", r.score},
                           {"l1_distance", r.l1_distance},
                           {"source_uri", r.source_uri},
                           {"metadata_text", r.metadata_text}};
    if (r.category) item["category"] = *r.category;
    if (r.dedup_group) {
      item["dedup_group"] = *r.dedup_group;
      item["duplicates"] = r.duplicates;
    }
    results.push_back(std::move(item));
  }
  return {{"version", kResponseVersion},
          {"results", std::move(results)},
          {"diagnostics", response.diagnostics.to_json()},
          {"cache_hit", cache_hit},
          {"partial", response.diagnostics.partial}};
}

SearchService::SearchService(std::shared_ptr<const retrieve::SearchEngine> engine,
                             feature::PipelineConfig pipeline, ServiceConfig config)
    : engine_(std::move(engine)),
      pipeline_(std::move(pipeline)),
      config_(std::move(config)),
      cache_(config_.cache_capacity) {
  require(engine_ != nullptr, ErrorCode::kConfig, "service needs a search engine");
}

std::unique_ptr<SearchService> SearchService::open(const ServiceConfig& config) {
  require(!config.index_path.empty(), ErrorCode::kConfig,
          "no index path; set service.index or INDEX_PATH");
  auto index = std::make_shared<const index::Index>(index::Index::load(config.index_path));
  std::optional<rank::RankingModel> ranker;
  auto ranker_path = config.ranker_path;
  if (ranker_path.empty() && std::filesystem::exists(config.index_path / "models" / "ranker.json")) {
    ranker_path = config.index_path / "models" / "ranker.json";
  }
  if (!ranker_path.empty()) ranker = rank::RankingModel::load(ranker_path);
  auto pipeline_path = config.pipeline_path;
  if (pipeline_path.empty() && std::filesystem::exists(config.index_path / "pipeline.conf")) {
    pipeline_path = config.index_path / "pipeline.conf";
  }
  auto pipeline = pipeline_path.empty() ? feature::PipelineConfig::defaults()
                                        : feature::PipelineConfig::load(pipeline_path);
  spdlog::info("service: index {} ({} docs, {} shards), ranker {}, pipeline {}",
               config.index_path.string(), index->doc_count(), index->shards().size(),
               ranker ? ranker_path.string() : "none",
               pipeline_path.empty() ? "defaults" : pipeline_path.string());
  auto engine = std::make_shared<const retrieve::SearchEngine>(index, std::move(ranker));
  return std::make_unique<SearchService>(engine, std::move(pipeline), config);
}

std::string SearchService::cache_key(const Digest128& content,
                                     const std::optional<feature::CropRect>& crop) const {
  std::string key = content.hex() + "|";
  if (crop) {
    const auto c = crop->clamped();
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", c.x0, c.y0, c.x1, c.y1);
    key += buf;
  } else {
    key += "full";
  }
  return key + "|" + pipeline_.digest().hex();
}

feature::FeatureBundle SearchService::features_for_upload(
    std::span<const std::uint8_t> bytes, const std::optional<feature::CropRect>& crop,
    const feature::ExtractInputs& inputs, bool* cache_hit) const {
  const std::string key = cache_key(md5(bytes), crop);
  feature::FeatureBundle bundle;
  if (auto hit = cache_.get(key)) {
    *cache_hit = true;
    bundle = std::move(*hit);
  } else {
    *cache_hit = false;
    bundle = feature::extract_features(bytes, crop, pipeline_, {});
    cache_.put(key, bundle);
  }
  for (const auto& [name, v] : inputs.external) bundle.embeddings[name] = v;
  if (inputs.category) bundle.category = inputs.category;
  if (inputs.metadata_text) bundle.metadata_text = inputs.metadata_text;
  return bundle;
}

HttpReply SearchService::run(const Request& request) const {
  retrieve::Query q;
  q.features = request.features;
  q.top_k = request.top_k;
  q.cascade.l1_keep = std::max(config_.l1_keep, request.top_k);
  q.cascade.m_match = config_.m_match;
  q.cascade.l2_exact = request.exact_l2;
  q.deadline_ms = request.deadline_ms;
  const auto response = engine_->search(q);
  return {200, response_json(response, request.cache_hit).dump()};
}

HttpReply SearchService::handle_search_json(const std::string& body) const {
  try {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorCode::kMalformedRequest, std::string("request body is not JSON: ") + e.what());
    }
    require(j.is_object(), ErrorCode::kMalformedRequest, "request body must be a JSON object");
    const bool by_id = j.contains("image_id");
    const bool by_vec = j.contains("embedding") || j.contains("embeddings");
    require(by_id != by_vec, ErrorCode::kMalformedRequest,
            "request needs exactly one of image_id or embedding");

    Request req;
    const auto top_k = optional_field<long long>(j, "top_k");
    require(!top_k || *top_k >= 1, ErrorCode::kMalformedRequest, "top_k must be at least 1");
    req.top_k = top_k ? static_cast<std::size_t>(*top_k) : config_.default_top_k;
    req.exact_l2 = optional_field<bool>(j, "exact_l2").value_or(true);
    req.deadline_ms = optional_field<double>(j, "deadline_ms");
    if (!req.deadline_ms && config_.default_deadline_ms > 0) {
      req.deadline_ms = config_.default_deadline_ms;
    }
    std::optional<feature::CropRect> crop;
    if (j.contains("crop") && !j["crop"].is_null()) crop = parse_crop(j["crop"]);

    if (by_id) {
      const std::uint64_t id = id_from_json(j["image_id"]);
      auto stored = engine_->doc_features(id);
      require(stored.has_value(), ErrorCode::kNotFound, "image " + std::to_string(id) + " is not indexed");
      if (crop) {
        const auto loc = engine_->index().locate(id);
        const auto meta = engine_->index().shards()[loc->shard].meta(loc->ordinal);
        const auto path = local_source(meta.source_uri);
        require(path.has_value(), ErrorCode::kMalformedRequest,
                "crop on image " + std::to_string(id) + " needs a readable source image");
        feature::ExtractInputs inputs;
        inputs.category = stored->category;
        inputs.metadata_text = stored->metadata_text;
        for (const auto& [name, v] : stored->embeddings) {
          if (const auto* spec = pipeline_.find(name);
              spec == nullptr || spec->kind == feature::FamilyKind::kExternal) {
            inputs.external[name] = v;
          }
        }
        req.features = features_for_upload(read_file_bytes(*path), crop, inputs, &req.cache_hit);
      } else {
        req.features = std::move(*stored);
      }
    } else {
      if (j.contains("embedding")) {
        req.features.embeddings[engine_->index().models().l1_family] =
            float_vector(j["embedding"], "embedding");
      }
      if (j.contains("embeddings")) {
        require(j["embeddings"].is_object(), ErrorCode::kMalformedRequest,
                "embeddings must map family names to arrays");
        for (const auto& [name, v] : j["embeddings"].items()) {
          req.features.embeddings[name] = float_vector(v, "embeddings." + name);
        }
      }
      req.features.metadata_text = optional_field<std::string>(j, "metadata_text");
      req.features.category = optional_field<std::string>(j, "category");
    }
    return run(req);
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  } catch (const std::exception& e) {
    return error_reply(ErrorCode::kIo, e.what());
  }
}

HttpReply SearchService::handle_search_upload(const std::string& image_bytes,
                                              const UploadFields& fields) const {
  try {
    require(!image_bytes.empty(), ErrorCode::kMalformedRequest, "upload has no image bytes");
    Request req;
    req.top_k = fields.top_k.value_or(config_.default_top_k);
    require(req.top_k >= 1, ErrorCode::kMalformedRequest, "top_k must be at least 1");
    req.exact_l2 = fields.exact_l2.value_or(true);
    req.deadline_ms = fields.deadline_ms;
    if (!req.deadline_ms && config_.default_deadline_ms > 0) {
      req.deadline_ms = config_.default_deadline_ms;
    }
    feature::ExtractInputs inputs;
    inputs.category = fields.category;
    inputs.metadata_text = fields.metadata_text;
    const std::span<const std::uint8_t> bytes(
        reinterpret_cast<const std::uint8_t*>(image_bytes.data()), image_bytes.size());
    req.features = features_for_upload(bytes, fields.crop, inputs, &req.cache_hit);
    return run(req);
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  } catch (const std::exception& e) {
    return error_reply(ErrorCode::kIo, e.what());
  }
}

HttpReply SearchService::handle_health() const {
  const auto& index = engine_->index();
  const auto* model = engine_->model();
  nlohmann::json j = {{"version", kResponseVersion},
                      {"status", "ok"},
                      {"doc_count", index.doc_count()},
                      {"shards", index.shards().size()},
                      {"l1_family", index.manifest().l1_family},
                      {"model_digests", index.manifest().model_digests},
                      {"pipeline_digest", pipeline_.digest().hex()},
                      {"ranker", model != nullptr},
                      {"cache", {{"size", cache_.size()}, {"capacity", cache_.capacity()}}}};
  return {200, j.dump()};
}

HttpReply SearchService::handle_doc(const std::string& id_text) const {
  try {
    const std::uint64_t id = parse_id(id_text);
    const auto loc = engine_->index().locate(id);
    require(loc.has_value(), ErrorCode::kNotFound, "image " + id_text + " is not indexed");
    const auto meta = engine_->index().shards()[loc->shard].meta(loc->ordinal);
    nlohmann::json j = {{"version", kResponseVersion},
                        {"doc_id", meta.image_id},
                        {"shard", loc->shard},
                        {"source_uri", meta.source_uri},
                        {"metadata_text", meta.metadata_text},
                        {"has_image", local_source(meta.source_uri).has_value()}};
    if (meta.category) j["category"] = *meta.category;
    if (meta.phash) j["phash"] = to_hex(*meta.phash);
    if (meta.digest) j["digest"] = meta.digest->hex();
    if (meta.dominant_color) {
      j["dominant_color"] = {{"rgb", meta.dominant_color->rgb},
                             {"weight", meta.dominant_color->weight}};
    }
    return {200, j.dump()};
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
}

HttpReply SearchService::handle_image(const std::string& id_text) const {
  try {
    const std::uint64_t id = parse_id(id_text);
    const auto loc = engine_->index().locate(id);
    require(loc.has_value(), ErrorCode::kNotFound, "image " + id_text + " is not indexed");
    const auto meta = engine_->index().shards()[loc->shard].meta(loc->ordinal);
    const auto path = local_source(meta.source_uri);
    require(path.has_value(), ErrorCode::kNotFound,
            "image " + id_text + " has no readable source file");
    const auto bytes = read_file_bytes(*path);
    return {200, std::string(bytes.begin(), bytes.end()), image_content_type(bytes)};
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  }
}

}  // namespace viscade::service
