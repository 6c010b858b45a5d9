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

#include "viscade/app/eval.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <thread>

#include "viscade/core/error.h"
#include "viscade/core/thread_pool.h"
#include "viscade/feature/pca.h"
#include "viscade/quantize/pq.h"

namespace viscade::app {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Bounded max-heap keeping the k smallest (distance, id) pairs.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  void offer(float d, std::uint64_t id) {
    if (k_ == 0) return;
    if (heap_.size() < k_) {
      heap_.emplace(d, id);
    } else if (std::pair(d, id) < heap_.top()) {
      heap_.pop();
      heap_.emplace(d, id);
    }
  }

  std::vector<std::uint64_t> ids() {
    std::vector<std::pair<float, std::uint64_t>> all;
    while (!heap_.empty()) {
      all.push_back(heap_.top());
      heap_.pop();
    }
    std::sort(all.begin(), all.end());
    std::vector<std::uint64_t> out;
    for (const auto& p : all) out.push_back(p.second);
    return out;
  }

 private:
  std::size_t k_;
  std::priority_queue<std::pair<float, std::uint64_t>> heap_;
};

std::string ratio_display(double ratio) {
  return std::to_string(static_cast<long long>(std::llround(ratio))) + "x";
}

}  // namespace

nlohmann::json CompressionReport::to_json() const {
  return {{"version", kReportVersion}, {"report", "compression"},
          {"raw_dim", raw_dim},        {"raw_bytes", raw_bytes},
          {"reduced_dim", reduced_dim}, {"subspaces", subspaces},
          {"centroids", centroids},    {"code_bytes", code_bytes},
          {"ratio", ratio},            {"display", display}};
}

CompressionReport compression_report(std::size_t raw_dim, std::size_t reduced_dim,
                                     std::size_t subspaces, std::size_t centroids) {
  require(centroids >= 2 && centroids <= 256, ErrorCode::kConfig,
          "centroids must be in [2, 256] for byte codes");
  require(raw_dim > 0 && subspaces > 0, ErrorCode::kConfig, "dims must be positive");
  require(reduced_dim % subspaces == 0, ErrorCode::kConfig,
          "reduced dim " + std::to_string(reduced_dim) + " is not divisible by " +
              std::to_string(subspaces) + " subspaces");
  CompressionReport r;
  r.raw_dim = raw_dim;
  r.raw_bytes = raw_dim * sizeof(float);
  r.reduced_dim = reduced_dim;
  r.subspaces = subspaces;
  r.centroids = centroids;
  r.code_bytes = subspaces;  // one byte per subspace
  r.ratio = static_cast<double>(r.raw_bytes) / static_cast<double>(r.code_bytes);
  r.display = ratio_display(r.ratio);
  return r;
}

std::vector<std::uint64_t> exact_top_k(const Matrix& base, std::span<const std::uint64_t> ids,
                                       std::span<const float> query, std::size_t k) {
  require(base.rows == ids.size(), ErrorCode::kConfig, "id count differs from row count");
  require(base.rows == 0 || base.cols == query.size(), ErrorCode::kDimMismatch,
          "query dim differs from base dim");
  TopK top(k);
  for (std::size_t r = 0; r < base.rows; ++r) top.offer(squared_l2(base.row(r), query), ids[r]);
  return top.ids();
}

std::vector<std::uint64_t> exact_top_k(const index::Index& index, const std::string& family,
                                       std::span<const float> query, std::size_t k) {
  TopK top(k);
  for (const auto& shard : index.shards()) {
    const auto* store = shard.features(family);
    require(store != nullptr, ErrorCode::kConfig, "index stores no raw vectors for " + family);
    require(store->dim == query.size(), ErrorCode::kDimMismatch,
            "query dim differs from stored dim");
    for (std::size_t o = 0; o < shard.doc_count(); ++o) {
      const float* v = store->vector(o);
      if (v == nullptr) continue;
      top.offer(squared_l2({v, store->dim}, query), shard.doc_ids()[o]);
    }
  }
  return top.ids();
}

double recall_at_k(std::span<const std::uint64_t> found, std::span<const std::uint64_t> truth,
                   std::size_t k) {
  const std::size_t t = std::min(k, truth.size());
  if (t == 0) return 1.0;
  const std::set<std::uint64_t> want(truth.begin(), truth.begin() + t);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < std::min(k, found.size()); ++i) hit += want.count(found[i]);
  return static_cast<double>(hit) / static_cast<double>(t);
}

nlohmann::json LatencySummary::to_json() const {
  return {{"count", count}, {"p50", p50}, {"p95", p95}, {"mean", mean}, {"max", max}};
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(p, 0.0, 100.0) / 100.0 * values.size());
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

LatencySummary summarize_latency(std::span<const double> values_ms) {
  LatencySummary s;
  s.count = values_ms.size();
  if (values_ms.empty()) return s;
  std::vector<double> v(values_ms.begin(), values_ms.end());
  s.p50 = percentile(v, 50);
  s.p95 = percentile(v, 95);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

nlohmann::json FidelityReport::to_json() const {
  return {{"version", kReportVersion}, {"report", "fidelity"}, {"queries", queries},
          {"k", k}, {"raw", raw}, {"pca", pca}, {"pq", pq},
          {"nn_raw", nn_raw}, {"nn_pca", nn_pca}, {"nn_pq", nn_pq}};
}

FidelityReport quantization_fidelity(const Matrix& base, std::span<const std::uint64_t> ids,
                                     const Matrix& queries, const index::FamilyQuantizer& q,
                                     std::size_t k) {
  const Matrix reduced = feature::pca_apply_batch(q.pca, base);
  const auto codes = quantize::pq_encode_batch(q.pq, reduced);
  const std::size_t n = q.pq.n();

  FidelityReport report;
  report.queries = queries.rows;
  report.k = k;
  std::vector<double> raw(queries.rows), pca(queries.rows), pq(queries.rows);
  std::vector<double> nn_raw(queries.rows), nn_pca(queries.rows), nn_pq(queries.rows);
  const auto has_nn = [](const std::vector<std::uint64_t>& found, std::uint64_t nn) {
    return std::find(found.begin(), found.end(), nn) != found.end() ? 1.0 : 0.0;
  };
  parallel_for(queries.rows, [&](std::size_t i) {
    const auto truth = exact_top_k(base, ids, queries.row(i), k);
    if (truth.empty()) return;
    const auto rq = feature::pca_apply(q.pca, queries.row(i));
    const auto by_raw = exact_top_k(base, ids, queries.row(i), k);
    const auto by_pca = exact_top_k(reduced, ids, rq, k);
    const auto table = quantize::pq_distance_table(q.pq, rq);
    TopK top(k);
    for (std::size_t r = 0; r < base.rows; ++r) {
      top.offer(table.adc_unchecked(codes.data() + r * n), ids[r]);
    }
    const auto by_pq = top.ids();
    raw[i] = recall_at_k(by_raw, truth, k);
    pca[i] = recall_at_k(by_pca, truth, k);
    pq[i] = recall_at_k(by_pq, truth, k);
    nn_raw[i] = has_nn(by_raw, truth.front());
    nn_pca[i] = has_nn(by_pca, truth.front());
    nn_pq[i] = has_nn(by_pq, truth.front());
  });
  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  report.raw = mean(raw);
  report.pca = mean(pca);
  report.pq = mean(pq);
  report.nn_raw = mean(nn_raw);
  report.nn_pca = mean(nn_pca);
  report.nn_pq = mean(nn_pq);
  return report;
}

nlohmann::json RecallReport::to_json() const {
  return {{"version", kReportVersion}, {"report", "recall"},
          {"queries", queries},        {"k", k},
          {"recall", recall},          {"mean_l0", mean_l0},
          {"mean_l1", mean_l1},        {"cascade_ms", cascade_ms.to_json()},
          {"exact_ms", exact_ms.to_json()}, {"speedup", speedup}};
}

RecallReport cascade_recall(const retrieve::SearchEngine& engine,
                            std::span<const feature::FeatureBundle> queries, std::size_t k,
                            const retrieve::CascadeConfig& cascade) {
  const auto& idx = engine.index();
  const std::string family =
      cascade.l1_family.empty() ? idx.manifest().l1_family : cascade.l1_family;
  RecallReport report;
  report.queries = queries.size();
  report.k = k;
  std::vector<double> cascade_ms, exact_ms;
  double recall = 0.0, l0 = 0.0, l1 = 0.0;
  for (const auto& features : queries) {
    const auto* emb = features.embedding(family);
    require(emb != nullptr, ErrorCode::kMalformedRequest, "query lacks the " + family + " embedding");
    retrieve::Query q;
    q.features = features;
    q.top_k = k;
    q.cascade = cascade;
    auto t0 = Clock::now();
    const auto response = engine.search(q);
    cascade_ms.push_back(ms_since(t0));
    t0 = Clock::now();
    const auto truth = exact_top_k(idx, family, *emb, k);
    exact_ms.push_back(ms_since(t0));
    std::vector<std::uint64_t> found;
    for (const auto& r : response.results) found.push_back(r.doc_id);
    recall += recall_at_k(found, truth, k);
    l0 += response.diagnostics.l0_count;
    l1 += response.diagnostics.l1_count;
  }
  if (!queries.empty()) {
    report.recall = recall / queries.size();
    report.mean_l0 = l0 / queries.size();
    report.mean_l1 = l1 / queries.size();
  }
  report.cascade_ms = summarize_latency(cascade_ms);
  report.exact_ms = summarize_latency(exact_ms);
  report.speedup = report.cascade_ms.p50 > 0 ? report.exact_ms.p50 / report.cascade_ms.p50 : 0.0;
  return report;
}

JudgmentData judgment_dataset(const retrieve::SearchEngine& engine,
                              const std::map<std::string, feature::FeatureBundle>& queries,
                              std::span<const rank::ListwiseLabel> labels) {
  std::map<std::string, std::vector<const rank::ListwiseLabel*>> by_query;
  for (const auto& l : labels) by_query[l.query_id].push_back(&l);
  const std::size_t arity = engine.index().registry().arity();

  JudgmentData out;
  for (const auto& [qid, group] : by_query) {
    auto qit = queries.find(qid);
    if (qit == queries.end()) continue;
    std::vector<std::uint64_t> ids;
    std::vector<int> grades;
    for (const auto* l : group) {
      ids.push_back(l->doc_id);
      grades.push_back(l->grade);
    }
    const auto rows = engine.feature_rows(qit->second, ids);
    Matrix m(0, arity);
    for (const auto& r : rows) m.append_row(r);
    out.data.add_query(m, grades);
    out.query_ids.push_back(qid);
  }
  return out;
}

std::vector<std::string> held_out_queries(std::vector<std::string> query_ids, double fraction,
                                          std::uint64_t seed) {
  std::sort(query_ids.begin(), query_ids.end());
  query_ids.erase(std::unique(query_ids.begin(), query_ids.end()), query_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(query_ids.begin(), query_ids.end(), rng);
  const auto n = static_cast<std::size_t>(std::llround(fraction * query_ids.size()));
  query_ids.resize(std::min(n, query_ids.size()));
  std::sort(query_ids.begin(), query_ids.end());
  return query_ids;
}

std::vector<rank::ListwiseLabel> filter_labels(std::span<const rank::ListwiseLabel> labels,
                                               const std::vector<std::string>& query_ids,
                                               bool keep) {
  const std::set<std::string> ids(query_ids.begin(), query_ids.end());
  std::vector<rank::ListwiseLabel> out;
  for (const auto& l : labels) {
    if ((ids.count(l.query_id) > 0) == keep) out.push_back(l);
  }
  return out;
}

nlohmann::json RankerReport::to_json() const {
  nlohmann::json base = nlohmann::json::array();
  for (const auto& b : baselines) {
    base.push_back({{"feature", b.feature}, {"direction", b.direction}, {"ndcg5", b.ndcg}});
  }
  return {{"version", kReportVersion}, {"report", "ndcg"},
          {"train_queries", train_queries}, {"test_queries", test_queries},
          {"model_ndcg5", model_ndcg}, {"baselines", base},
          {"best_baseline", best_feature}, {"best_baseline_ndcg5", best_baseline},
          {"model_wins", model_wins()}};
}

RankerReport evaluate_ranker(const rank::RankingModel& model, const rank::RankingDataset& train,
                             const rank::RankingDataset& test,
                             const rank::FeatureRegistry& registry) {
  constexpr std::size_t kCutoff = 5;
  const auto column = [](const rank::RankingDataset& d, std::size_t c, int dir) {
    std::vector<double> s(d.rows.rows);
    for (std::size_t r = 0; r < d.rows.rows; ++r) s[r] = dir * d.rows(r, c);
    return s;
  };

  RankerReport report;
  report.train_queries = train.queries();
  report.test_queries = test.queries();
  std::vector<double> scores(test.rows.rows);
  for (std::size_t r = 0; r < test.rows.rows; ++r) scores[r] = rank::model_score(model, test.rows.row(r));
  report.model_ndcg = rank::mean_ndcg(test, scores, kCutoff);

  // Value features precede the presence masks in the row layout.
  const auto names = registry.names();
  const std::size_t value_features = registry.families().size() + 4;
  for (std::size_t c = 0; c < value_features; ++c) {
    const double up = rank::mean_ndcg(train, column(train, c, 1), kCutoff);
    const double down = rank::mean_ndcg(train, column(train, c, -1), kCutoff);
    BaselineScore b;
    b.feature = names[c];
    b.direction = up >= down ? 1 : -1;
    b.ndcg = rank::mean_ndcg(test, column(test, c, b.direction), kCutoff);
    if (report.baselines.empty() || b.ndcg > report.best_baseline) {
      report.best_baseline = b.ndcg;
      report.best_feature = b.feature;
    }
    report.baselines.push_back(b);
  }
  return report;
}

std::vector<BenchRow> run_bench(const retrieve::SearchEngine& engine,
                                std::span<const retrieve::Query> queries,
                                std::span<const std::string> query_ids, std::size_t workers) {
  require(query_ids.size() == queries.size(), ErrorCode::kConfig,
          "query id count differs from query count");
  std::vector<BenchRow> rows(queries.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < queries.size();) {
      const auto response = engine.search(queries[i]);
      auto& row = rows[i];
      row.query_id = query_ids[i];
      row.stage_ms = response.diagnostics.stage_latencies_ms;
      row.l0 = response.diagnostics.l0_count;
      row.l1 = response.diagnostics.l1_count;
      row.l2 = response.diagnostics.l2_count;
      row.results = response.results.size();
      row.partial = response.diagnostics.partial;
    }
  };
  std::vector<std::jthread> threads;
  for (std::size_t w = 1; w < std::max<std::size_t>(workers, 1); ++w) threads.emplace_back(work);
  work();
  return rows;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
  static const char* kStages[] = {"words", "l0_l1", "l2", "dedup", "total"};
  out << "query_id";
  for (const char* s : kStages) out << ',' << s << "_ms";
  out << ",l0_count,l1_count,l2_count,result_count,partial\n";
  for (const auto& r : rows) {
    out << r.query_id;
    for (const char* s : kStages) {
      auto it = r.stage_ms.find(s);
      out << ',' << (it == r.stage_ms.end() ? 0.0 : it->second);
    }
    out << ',' << r.l0 << ',' << r.l1 << ',' << r.l2 << ',' << r.results << ','
        << (r.partial ? 1 : 0) << '\n';
  }
}

}  // namespace viscade::app
