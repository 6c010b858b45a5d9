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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "viscade/core/error.h"
#include "viscade/feature/pca.h"
#include "viscade/retrieve/dedup.h"

namespace viscade::retrieve {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

nlohmann::json Diagnostics::to_json() const {
  return {{"l0_count", l0_count},
          {"l1_count", l1_count},
          {"l2_count", l2_count},
          {"final_count", final_count},
          {"partial", partial},
          {"shards_total", shards_total},
          {"shards_responded", shards_responded},
          {"skipped_missing_code", skipped_missing_code},
          {"stage_latencies_ms", stage_latencies_ms}};
}

SearchEngine::SearchEngine(std::shared_ptr<const index::Index> index,
                           std::optional<rank::RankingModel> model, EngineOptions options)
    : index_(std::move(index)), model_(std::move(model)) {
  require(index_ != nullptr, ErrorCode::kConfig, "search engine needs an index");
  if (model_) {
    const auto& reg = index_->registry();
    require(model_->arity() == reg.arity(), ErrorCode::kConfig,
            "ranking model expects " + std::to_string(model_->arity()) +
                " features, index rows have " + std::to_string(reg.arity()));
    require(model_->registry_digest.empty() || model_->registry_digest == reg.digest().hex(),
            ErrorCode::kConfig,
            "ranking model was trained on a different feature registry than this index");
  }
  std::size_t workers = options.workers;
  if (workers == 0) {
    workers = std::max<std::size_t>(std::thread::hardware_concurrency(), index_->shards().size());
  }
  pool_ = std::make_unique<ThreadPool>(std::max<std::size_t>(workers, 1));
}

SearchEngine::~SearchEngine() { pool_.reset(); }

PreparedQuery SearchEngine::prepare(const feature::FeatureBundle& features,
                                    const CascadeConfig& cascade) const {
  const auto& models = index_->models();
  PreparedQuery p;
  p.l1_family = cascade.l1_family.empty() ? models.l1_family : cascade.l1_family;
  require(p.l1_family == models.l1_family, ErrorCode::kConfig,
          "index was built with L1 family '" + models.l1_family + "', query asks for '" +
              p.l1_family + "'");
  const auto* v = features.embedding(p.l1_family);
  require(v != nullptr, ErrorCode::kMalformedRequest,
          "query has no '" + p.l1_family + "' embedding");
  const auto& q = models.quantizer(p.l1_family);
  require(v->size() == q.input_dim(), ErrorCode::kDimMismatch,
          "query '" + p.l1_family + "' embedding has dim " + std::to_string(v->size()) +
              ", index expects " + std::to_string(q.input_dim()));
  p.reduced = q.reduce(*v);
  p.words = models.words_for(p.reduced);
  p.table = quantize::pq_distance_table(q.pq, p.reduced);
  return p;
}

ShardResponse SearchEngine::run_shard(std::uint32_t shard_id, const PreparedQuery& prepared,
                                      const Query& query) const {
  if (hook_) hook_(shard_id);
  const auto& shard = index_->shards()[shard_id];
  ShardResponse r;
  r.shard_id = shard_id;
  const auto ords = level0_ordinals(prepared.words, shard, query.cascade.m_match);
  r.l0_count = ords.size();
  if (query.trace) {
    r.l0_ids.reserve(ords.size());
    for (auto o : ords) r.l0_ids.push_back(shard.doc_ids()[o]);
  }
  auto l1 = level1_rank(ords, prepared.table, shard, prepared.l1_family, query.cascade.l1_keep);
  r.candidates = std::move(l1.kept);
  r.skipped_missing_code = l1.skipped_missing_code;
  return r;
}

std::vector<ShardResponse> SearchEngine::scatter_gather(const PreparedQuery& prepared,
                                                        const Query& query) const {
  const auto n = static_cast<std::uint32_t>(index_->shards().size());
  std::vector<ShardResponse> out(n);
  if (!query.deadline_ms && n == 1) {
    out[0] = run_shard(0, prepared, query);
    return out;
  }
  // Late shards keep running after we stop waiting, so they own their inputs.
  auto state = std::make_shared<std::pair<PreparedQuery, Query>>(prepared, query);
  std::vector<std::future<ShardResponse>> futures;
  futures.reserve(n);
  const auto start = Clock::now();
  for (std::uint32_t s = 0; s < n; ++s) {
    futures.push_back(pool_->submit(
        [this, s, state] { return run_shard(s, state->first, state->second); }));
  }
  const auto deadline =
      query.deadline_ms
          ? start + std::chrono::duration_cast<Clock::duration>(
                        std::chrono::duration<double, std::milli>(*query.deadline_ms))
          : Clock::time_point::max();
  for (std::uint32_t s = 0; s < n; ++s) {
    if (query.deadline_ms &&
        futures[s].wait_until(deadline) != std::future_status::ready) {
      out[s].shard_id = s;
      out[s].complete = false;
      continue;
    }
    out[s] = futures[s].get();
  }
  return out;
}

feature::FeatureBundle SearchEngine::candidate_bundle(std::uint32_t shard_id, std::size_t ordinal,
                                                      bool exact) const {
  const auto& shard = index_->shards()[shard_id];
  const auto meta = shard.meta(ordinal);
  feature::FeatureBundle b;
  b.category = meta.category;
  b.phash = meta.phash;
  b.digest = meta.digest;
  b.dominant_color = meta.dominant_color;
  if (!meta.metadata_text.empty()) b.metadata_text = meta.metadata_text;
  for (const auto& info : index_->manifest().families) {
    const auto* raw = shard.features(info.name);
    if (exact && raw != nullptr) {
      if (const float* v = raw->vector(ordinal)) {
        b.embeddings[info.name].assign(v, v + raw->dim);
        continue;
      }
    }
    const auto* codes = shard.codes(info.name);
    if (codes == nullptr) continue;
    const std::uint8_t* code = codes->code(ordinal);
    if (code == nullptr) continue;
    const auto& q = index_->models().quantizer(info.name);
    const auto reduced =
        quantize::pq_decode(q.pq, std::span<const std::uint8_t>(code, codes->bytes_per_code));
    b.embeddings[info.name] = feature::pca_inverse(q.pca, reduced);
  }
  return b;
}

std::vector<RankedResult> SearchEngine::level2_rank(const Query& query,
                                                    std::span<const Candidate> candidates) const {
  const auto& reg = index_->registry();
  const std::string& l1_family = index_->models().l1_family;
  const auto* query_l1 = query.features.embedding(l1_family);
  std::vector<RankedResult> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto& shard = index_->shards()[c.shard];
    const auto meta = shard.meta(c.ordinal);
    const auto bundle = candidate_bundle(c.shard, c.ordinal, query.cascade.l2_exact);
    RankedResult r;
    r.doc_id = c.doc_id;
    r.l1_distance = c.l1_distance;
    r.source_uri = meta.source_uri;
    r.metadata_text = meta.metadata_text;
    r.category = meta.category;
    if (model_) {
      const auto row =
          rank::assemble_feature_row(query.features, bundle, c.l1_distance, reg,
                                     index_->text_stats());
      r.score = rank::model_score(*model_, row);
    } else {
      const auto* cand_l1 = bundle.embedding(l1_family);
      // 0.0 - d so an exact match scores +0, not -0.
      r.score = (query_l1 != nullptr && cand_l1 != nullptr &&
                 cand_l1->size() == query_l1->size())
                    ? 0.0 - squared_distance(*query_l1, *cand_l1)
                    : 0.0 - static_cast<double>(c.l1_distance);
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const RankedResult& a, const RankedResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  return out;
}

SearchResponse SearchEngine::search(const Query& query) const {
  require(query.top_k >= 1, ErrorCode::kMalformedRequest, "top_k must be at least 1");
  require(query.cascade.l1_keep >= query.top_k, ErrorCode::kConfig,
          "l1_keep (" + std::to_string(query.cascade.l1_keep) + ") must be at least top_k (" +
              std::to_string(query.top_k) + ")");
  const auto t0 = Clock::now();
  SearchResponse resp;
  auto& diag = resp.diagnostics;

  const auto prepared = prepare(query.features, query.cascade);
  diag.stage_latencies_ms["words"] = ms_since(t0);

  const auto t1 = Clock::now();
  const auto responses = scatter_gather(prepared, query);
  diag.stage_latencies_ms["l0_l1"] = ms_since(t1);
  diag.shards_total = responses.size();
  for (const auto& r : responses) {
    if (!r.complete) continue;
    ++diag.shards_responded;
    diag.l0_count += r.l0_count;
    diag.skipped_missing_code += r.skipped_missing_code;
  }
  diag.partial = diag.shards_responded < diag.shards_total;
  if (diag.shards_responded == 0) {
    throw_error(ErrorCode::kAllShardsTimedOut,
                "all " + std::to_string(diag.shards_total) + " shards missed the " +
                    std::to_string(query.deadline_ms.value_or(0.0)) + " ms deadline; " +
                    diag.to_json().dump());
  }
  const auto merged = merge_candidates(responses, query.cascade.l1_keep);
  diag.l1_count = merged.size();
  if (query.trace) {
    SearchTrace trace;
    for (const auto& r : responses) {
      trace.l0_ids.insert(trace.l0_ids.end(), r.l0_ids.begin(), r.l0_ids.end());
    }
    std::sort(trace.l0_ids.begin(), trace.l0_ids.end());
    for (const auto& c : merged) trace.l1_ids.push_back(c.doc_id);
    resp.trace = std::move(trace);
  }

  const auto t2 = Clock::now();
  auto ranked = level2_rank(query, merged);
  diag.l2_count = ranked.size();
  diag.stage_latencies_ms["l2"] = ms_since(t2);

  const auto t3 = Clock::now();
  if (query.dedup && !ranked.empty()) {
    std::vector<DedupKey> keys;
    keys.reserve(ranked.size());
    for (const auto& r : ranked) {
      const auto loc = index_->locate(r.doc_id);
      const auto meta = index_->shards()[loc->shard].meta(loc->ordinal);
      keys.push_back({meta.digest, meta.phash});
    }
    const auto group = duplicate_groups(keys, query.phash_threshold);
    std::vector<std::size_t> members(ranked.size(), 0);
    for (auto g : group) ++members[g];
    std::vector<RankedResult> kept;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (group[i] != i) continue;
      if (members[i] > 1) {
        ranked[i].dedup_group = ranked[i].doc_id;
        ranked[i].duplicates = members[i] - 1;
      }
      kept.push_back(std::move(ranked[i]));
    }
    ranked = std::move(kept);
  }
  if (ranked.size() > query.top_k) ranked.resize(query.top_k);
  diag.stage_latencies_ms["dedup"] = ms_since(t3);
  diag.final_count = ranked.size();
  resp.results = std::move(ranked);
  diag.stage_latencies_ms["total"] = ms_since(t0);
  return resp;
}

std::vector<rank::L2FeatureRow> SearchEngine::feature_rows(
    const feature::FeatureBundle& query, std::span<const std::uint64_t> doc_ids,
    bool exact) const {
  const auto prepared = prepare(query, CascadeConfig{});
  std::vector<rank::L2FeatureRow> rows;
  rows.reserve(doc_ids.size());
  for (auto id : doc_ids) {
    const auto loc = index_->locate(id);
    require(loc.has_value(), ErrorCode::kNotFound, "doc " + std::to_string(id) + " not indexed");
    const auto& shard = index_->shards()[loc->shard];
    const auto* codes = shard.codes(prepared.l1_family);
    const std::uint8_t* code = codes ? codes->code(loc->ordinal) : nullptr;
    const double l1 = code ? prepared.table.adc_unchecked(code)
                           : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(rank::assemble_feature_row(
        query, candidate_bundle(loc->shard, loc->ordinal, exact), std::isnan(l1) ? 0.0 : l1,
        index_->registry(), index_->text_stats()));
  }
  return rows;
}

std::optional<feature::FeatureBundle> SearchEngine::doc_features(std::uint64_t image_id) const {
  const auto loc = index_->locate(image_id);
  if (!loc) return std::nullopt;
  return candidate_bundle(loc->shard, loc->ordinal, true);
}

}  // namespace viscade::retrieve
