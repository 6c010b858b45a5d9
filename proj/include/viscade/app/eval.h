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

#ifndef VISCADE_APP_EVAL_H_
#define VISCADE_APP_EVAL_H_

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "viscade/core/matrix.h"
#include "viscade/index/index.h"
#include "viscade/rank/judgments.h"
#include "viscade/rank/lambdamart.h"
#include "viscade/retrieve/engine.h"

namespace viscade::app {

inline constexpr int kReportVersion = 1;

struct CompressionReport {
  std::size_t raw_dim = 0;
  std::size_t raw_bytes = 0;  // float32
  std::size_t reduced_dim = 0;
  std::size_t subspaces = 0;
  std::size_t centroids = 0;
  std::size_t code_bytes = 0;
  double ratio = 0.0;
  std::string display;  // ratio rounded to an integer, e.g. "328x"

  nlohmann::json to_json() const;
};

// Throws kConfig when centroids is not in [2, 256].
CompressionReport compression_report(std::size_t raw_dim, std::size_t reduced_dim,
                                     std::size_t subspaces, std::size_t centroids);

// Smallest k rows of `base` by squared L2 to `query`, ties by id.
std::vector<std::uint64_t> exact_top_k(const Matrix& base, std::span<const std::uint64_t> ids,
                                       std::span<const float> query, std::size_t k);

// Linear scan over every stored raw vector of `family` in the index.
std::vector<std::uint64_t> exact_top_k(const index::Index& index, const std::string& family,
                                       std::span<const float> query, std::size_t k);

// |found[:k] ∩ truth[:k]| / min(k, |truth|); 1 when truth is empty.
double recall_at_k(std::span<const std::uint64_t> found, std::span<const std::uint64_t> truth,
                   std::size_t k);

struct LatencySummary {
  std::size_t count = 0;
  double p50 = 0.0;
  double p95 = 0.0;
  double mean = 0.0;
  double max = 0.0;

  nlohmann::json to_json() const;
};

// Nearest-rank percentile; p in [0, 100]. Empty input gives 0.
double percentile(std::vector<double> values, double p);
LatencySummary summarize_latency(std::span<const double> values_ms);

// Recall of exact scans in the reduced and quantized spaces against the raw
// scan. The raw figures are the reference and are 1 by construction.
// raw/pca/pq: overlap of the top k with the true top k.
// nn_*: fraction of queries whose true nearest neighbour is in the top k.
struct FidelityReport {
  std::size_t queries = 0;
  std::size_t k = 0;
  double raw = 0.0;
  double pca = 0.0;
  double pq = 0.0;
  double nn_raw = 0.0;
  double nn_pca = 0.0;
  double nn_pq = 0.0;

  nlohmann::json to_json() const;
};

FidelityReport quantization_fidelity(const Matrix& base, std::span<const std::uint64_t> ids,
                                     const Matrix& queries, const index::FamilyQuantizer& q,
                                     std::size_t k);

struct RecallReport {
  std::size_t queries = 0;
  std::size_t k = 0;
  double recall = 0.0;
  double mean_l0 = 0.0;
  double mean_l1 = 0.0;
  LatencySummary cascade_ms;
  LatencySummary exact_ms;
  double speedup = 0.0;  // exact median over cascade median

  nlohmann::json to_json() const;
};

// Runs each query through the cascade and through an exact linear scan over
// the stored L1 vectors, one query at a time.
RecallReport cascade_recall(const retrieve::SearchEngine& engine,
                            std::span<const feature::FeatureBundle> queries, std::size_t k,
                            const retrieve::CascadeConfig& cascade = {});

// Rows for every labelled (query, doc) pair, grouped by query id in sorted
// order. Labels whose query has no features are skipped.
struct JudgmentData {
  rank::RankingDataset data;
  std::vector<std::string> query_ids;
};

JudgmentData judgment_dataset(const retrieve::SearchEngine& engine,
                              const std::map<std::string, feature::FeatureBundle>& queries,
                              std::span<const rank::ListwiseLabel> labels);

// Deterministic split of query ids; returns the held-out set.
std::vector<std::string> held_out_queries(std::vector<std::string> query_ids, double fraction,
                                          std::uint64_t seed);

std::vector<rank::ListwiseLabel> filter_labels(std::span<const rank::ListwiseLabel> labels,
                                               const std::vector<std::string>& query_ids,
                                               bool keep);

struct BaselineScore {
  std::string feature;
  int direction = 1;  // +1 ranks high values first
  double ndcg = 0.0;
};

struct RankerReport {
  std::size_t train_queries = 0;
  std::size_t test_queries = 0;
  double model_ndcg = 0.0;
  std::vector<BaselineScore> baselines;
  double best_baseline = 0.0;
  std::string best_feature;

  bool model_wins() const { return model_ndcg > best_baseline; }
  nlohmann::json to_json() const;
};

// NDCG@5 of the model on `test` against each value feature of the registry
// used alone. A baseline's direction is the one that scores better on
// `train`, so the comparison favours the baselines.
RankerReport evaluate_ranker(const rank::RankingModel& model, const rank::RankingDataset& train,
                             const rank::RankingDataset& test,
                             const rank::FeatureRegistry& registry);

struct BenchRow {
  std::string query_id;
  std::map<std::string, double> stage_ms;
  std::size_t l0 = 0;
  std::size_t l1 = 0;
  std::size_t l2 = 0;
  std::size_t results = 0;
  bool partial = false;
};

// Runs the queries on `workers` threads sharing one engine. Rows come back in
// query order.
std::vector<BenchRow> run_bench(const retrieve::SearchEngine& engine,
                                std::span<const retrieve::Query> queries,
                                std::span<const std::string> query_ids, std::size_t workers);

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

}  // namespace viscade::app

#endif  // VISCADE_APP_EVAL_H_
