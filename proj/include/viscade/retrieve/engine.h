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

#ifndef VISCADE_RETRIEVE_ENGINE_H_
#define VISCADE_RETRIEVE_ENGINE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "viscade/core/thread_pool.h"
#include "viscade/index/index.h"
#include "viscade/rank/feature_row.h"
#include "viscade/rank/lambdamart.h"
#include "viscade/retrieve/cascade.h"

namespace viscade::retrieve {

struct RankedResult {
  std::uint64_t doc_id = 0;
  double score = 0.0;
  float l1_distance = 0.0f;
  std::string source_uri;
  std::string metadata_text;
  std::optional<std::string> category;
  std::optional<std::uint64_t> dedup_group;  // representative id when duplicates collapsed
  std::size_t duplicates = 0;                // members dropped in favour of this result
};

struct Diagnostics {
  std::size_t l0_count = 0;
  std::size_t l1_count = 0;
  std::size_t l2_count = 0;
  std::size_t final_count = 0;
  bool partial = false;
  std::size_t shards_total = 0;
  std::size_t shards_responded = 0;
  std::size_t skipped_missing_code = 0;
  std::map<std::string, double> stage_latencies_ms;  // words, l0_l1, l2, dedup, total

  nlohmann::json to_json() const;
};

struct SearchTrace {
  std::vector<std::uint64_t> l0_ids;  // ascending
  std::vector<std::uint64_t> l1_ids;  // L1 order
};

struct SearchResponse {
  std::vector<RankedResult> results;
  Diagnostics diagnostics;
  std::optional<SearchTrace> trace;
};

// Query-side state shared by every shard.
struct PreparedQuery {
  std::string l1_family;
  std::vector<float> reduced;
  quantize::VisualWordSet words;
  quantize::DistanceTable table;
};

struct EngineOptions {
  std::size_t workers = 0;  // 0: max(hardware threads, shard count)
};

class SearchEngine {
 public:
  // Throws kConfig when the model was trained against a different feature
  // registry than the index's.
  explicit SearchEngine(std::shared_ptr<const index::Index> index,
                        std::optional<rank::RankingModel> model = std::nullopt,
                        EngineOptions options = {});
  ~SearchEngine();

  SearchEngine(const SearchEngine&) = delete;
  SearchEngine& operator=(const SearchEngine&) = delete;

  // Empty Level-0 gives empty results, not an error. Throws
  // kAllShardsTimedOut when no shard answers before the deadline and
  // kMalformedRequest when the query lacks the L1 embedding.
  SearchResponse search(const Query& query) const;

  PreparedQuery prepare(const feature::FeatureBundle& features,
                        const CascadeConfig& cascade) const;

  // Level-0 and Level-1 on every shard. Late shards come back with
  // complete=false and no candidates.
  std::vector<ShardResponse> scatter_gather(const PreparedQuery& prepared,
                                            const Query& query) const;

  std::vector<RankedResult> level2_rank(const Query& query,
                                        std::span<const Candidate> candidates) const;

  // L2 rows for arbitrary indexed docs, with l1_distance from the PQ codes.
  // Unknown ids throw kNotFound.
  std::vector<rank::L2FeatureRow> feature_rows(const feature::FeatureBundle& query,
                                               std::span<const std::uint64_t> doc_ids,
                                               bool exact = true) const;

  // Stored features of an indexed doc, with PQ reconstructions standing in
  // for vectors that were not stored raw.
  std::optional<feature::FeatureBundle> doc_features(std::uint64_t image_id) const;

  const index::Index& index() const { return *index_; }
  const rank::RankingModel* model() const { return model_ ? &*model_ : nullptr; }

  // Runs at the start of each shard's work; used for fault injection.
  void set_shard_hook(std::function<void(std::uint32_t)> hook) { hook_ = std::move(hook); }

 private:
  feature::FeatureBundle candidate_bundle(std::uint32_t shard, std::size_t ordinal,
                                          bool exact) const;
  ShardResponse run_shard(std::uint32_t shard, const PreparedQuery& prepared,
                          const Query& query) const;

  std::shared_ptr<const index::Index> index_;
  std::optional<rank::RankingModel> model_;
  std::unique_ptr<ThreadPool> pool_;
  std::function<void(std::uint32_t)> hook_;
};

}  // namespace viscade::retrieve

#endif  // VISCADE_RETRIEVE_ENGINE_H_
