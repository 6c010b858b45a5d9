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

// Acceptance runner: one PASS/FAIL line per criterion, with the measured
// numbers. Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <bit>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "support/fixtures.h"
#include "support/splitmix.h"
#include "support/stats.h"
#include "viscade/app/eval.h"
#include "viscade/app/synth.h"
#include "viscade/feature/triplet.h"
#include "viscade/index/index.h"
#include "viscade/quantize/pq.h"
#include "viscade/rank/lambdamart.h"
#include "viscade/rank/ndcg.h"
#include "viscade/retrieve/dedup.h"
#include "viscade/retrieve/engine.h"

namespace viscade::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::shared_ptr<const index::Index> share(index::Index idx) {
  return std::make_shared<const index::Index>(std::move(idx));
}

// Raw vectors of one family, row-aligned with ids.
void family_rows(std::span<const index::ImageDoc> docs, const std::string& family, Matrix& m,
                 std::vector<std::uint64_t>* ids) {
  for (const auto& d : docs) {
    if (const auto* v = d.features.embedding(family)) {
      if (m.cols == 0) m = Matrix(0, v->size());
      m.append_row(*v);
      if (ids) ids->push_back(d.image_id);
    }
  }
}

Outcome compression() {
  const auto r = app::compression_report(2048, 100, 25, 256);
  const bool ok = r.raw_bytes == 8192 && r.code_bytes == 25 && r.ratio == 327.68 &&
                  r.display == "328x";
  return {ok, fmt("raw %zu B -> PQ %zu B, ratio %.2f (%s)", r.raw_bytes, r.code_bytes, r.ratio,
                  r.display.c_str())};
}

app::FidelityReport fidelity_on(const app::CorpusSpec& spec) {
  const app::SyntheticWorld world(spec);
  const auto corpus = world.corpus();
  index::IndexBuildConfig cfg;
  cfg.l1_family = "emb";
  cfg.seed = 1;
  index::FamilyQuantizer q;
  q.pca = index::train_family_pca(corpus.docs, "emb", cfg, cfg.seed);
  q.pq = index::train_family_pq(corpus.docs, "emb", q.pca, cfg, cfg.seed);
  Matrix base, queries;
  std::vector<std::uint64_t> ids;
  family_rows(corpus.docs, "emb", base, &ids);
  family_rows(world.queries(100, 99).docs, "emb", queries, nullptr);
  return app::quantization_fidelity(base, ids, queries, q, 10);
}

Outcome pq_fidelity() {
  app::CorpusSpec spec;  // 100 clusters x 100 docs, dim 128
  spec.seed = 11;
  const auto r = fidelity_on(spec);
  // Same size, but neighbourhoods no larger than k: reported for context.
  app::CorpusSpec groups = spec;
  groups.clusters = 1000;
  groups.docs_per_cluster = 10;
  const auto g = fidelity_on(groups);
  const bool order = r.raw >= r.pca && r.pca >= r.pq;
  const bool ratio = r.pq >= 0.9 * r.raw;
  return {order && ratio,
          fmt("recall@10 raw %.3f >= PCA %.3f >= PQ %.3f: %s; PQ/raw %.3f (need 0.90); "
              "NN-in-top-10 PQ %.2f; 1000x10 corpus: PCA %.3f PQ %.3f",
              r.raw, r.pca, r.pq, order ? "holds" : "violated", r.pq / r.raw, r.nn_pq, g.pca,
              g.pq)};
}

bool same_results(const retrieve::SearchResponse& a, const retrieve::SearchResponse& b) {
  if (a.results.size() != b.results.size()) return false;
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    const auto& x = a.results[i];
    const auto& y = b.results[i];
    if (x.doc_id != y.doc_id || x.score != y.score || x.dedup_group != y.dedup_group ||
        x.duplicates != y.duplicates) {
      return false;
    }
  }
  return true;
}

Outcome cascade_correctness() {
  auto spec = testing::small_spec(40, 100, 21);
  spec.near_dup_rate = 0.02;
  spec.exact_dup_rate = 0.02;
  const app::SyntheticWorld world(spec);
  const auto corpus = world.corpus();
  auto cfg = testing::small_build_config();
  const auto models = index::train_index_models(corpus.docs, cfg);
  std::vector<std::unique_ptr<retrieve::SearchEngine>> engines;
  for (std::uint32_t k : {1u, 2u, 8u}) {
    cfg.shards = k;
    engines.push_back(std::make_unique<retrieve::SearchEngine>(
        share(index::Index::build(corpus.docs, models, cfg))));
  }

  testing::SplitMix64 rng(5150);
  const auto fresh = world.queries(500, 77);
  std::size_t containment_bad = 0, partition_bad = 0, nonempty = 0;
  const std::size_t n = 1000;
  for (std::size_t i = 0; i < n; ++i) {
    retrieve::Query q;
    q.features = i % 2 == 0 ? fresh.docs[i / 2].features
                            : corpus.docs[rng.next() % corpus.docs.size()].features;
    q.top_k = 1 + rng.next() % 40;
    q.cascade.m_match = 1 + rng.next() % 3;
    q.cascade.l1_keep = q.top_k + rng.next() % 400;
    q.cascade.l2_exact = rng.next() % 4 != 0;
    q.dedup = rng.next() % 2 == 0;
    q.trace = true;
    std::vector<retrieve::SearchResponse> rs;
    for (const auto& e : engines) rs.push_back(e->search(q));
    for (const auto& r : rs) {
      const std::set<std::uint64_t> l0(r.trace->l0_ids.begin(), r.trace->l0_ids.end());
      const std::set<std::uint64_t> l1(r.trace->l1_ids.begin(), r.trace->l1_ids.end());
      bool ok = r.results.size() <= q.top_k;
      for (auto id : l1) ok = ok && l0.count(id);
      for (const auto& res : r.results) ok = ok && l1.count(res.doc_id);
      containment_bad += !ok;
    }
    partition_bad += !(same_results(rs[0], rs[1]) && same_results(rs[0], rs[2]) &&
                       rs[0].trace->l0_ids == rs[1].trace->l0_ids &&
                       rs[0].trace->l0_ids == rs[2].trace->l0_ids);
    nonempty += !rs[0].results.empty();
  }
  return {containment_bad == 0 && partition_bad == 0 && nonempty > n / 2,
          fmt("%zu queries x K={1,2,8}: containment violations %zu, partition mismatches %zu, "
              "non-empty %zu",
              n, containment_bad, partition_bad, nonempty)};
}

Outcome cascade_efficiency() {
  const auto t0 = Clock::now();
  app::CorpusSpec spec;
  spec.clusters = 1000;
  spec.docs_per_cluster = 1000;
  spec.seed = 1234;
  const app::SyntheticWorld world(spec);
  const auto queries = world.queries(200, 4321);
  std::shared_ptr<const index::Index> idx;
  {
    const auto corpus = world.corpus();
    index::IndexBuildConfig cfg;
    cfg.l1_family = "emb";
    cfg.seed = 1;
    idx = share(testing::build_index(corpus.docs, cfg));
  }
  const double build_s = std::chrono::duration<double>(Clock::now() - t0).count();
  const retrieve::SearchEngine engine(idx);
  std::vector<feature::FeatureBundle> qf;
  for (const auto& d : queries.docs) qf.push_back(d.features);
  // Warm caches with a few queries before timing.
  for (std::size_t i = 0; i < 5; ++i) {
    retrieve::Query q;
    q.features = qf[i];
    engine.search(q);
  }
  const auto r = app::cascade_recall(engine, qf, 10);
  const bool ok = r.cascade_ms.p50 <= 100.0 && r.speedup >= 10.0 && r.recall >= 0.6;
  return {ok, fmt("%zu docs: cascade p50 %.2f ms p95 %.2f ms, exact scan p50 %.2f ms, speedup "
                  "%.1fx, recall@10 %.3f, mean L0 %.0f (build %.0f s)",
                  idx->doc_count(), r.cascade_ms.p50, r.cascade_ms.p95, r.exact_ms.p50,
                  r.speedup, r.recall, r.mean_l0, build_s)};
}

Outcome ranker_lift() {
  app::CorpusSpec spec;
  spec.aux_dim = 64;
  spec.seed = 31;
  const app::SyntheticWorld world(spec);
  const auto corpus = world.corpus();
  const auto queries = world.queries(300, 32);
  app::JudgmentSpec js;
  js.seed = 33;
  const auto labels =
      rank::pairwise_to_listwise(app::generate_judgments(world, corpus, queries, js).judgments);

  index::IndexBuildConfig cfg;
  cfg.l1_family = "emb";
  cfg.seed = 1;
  const auto idx = share(testing::build_index(corpus.docs, cfg));
  const retrieve::SearchEngine engine(idx);
  std::map<std::string, feature::FeatureBundle> qf;
  for (const auto& d : queries.docs) qf[std::to_string(d.image_id)] = d.features;
  std::vector<std::string> qids;
  for (const auto& l : labels) qids.push_back(l.query_id);
  const auto held = app::held_out_queries(qids, 0.3, 34);
  const auto train = app::judgment_dataset(engine, qf, app::filter_labels(labels, held, false));
  const auto test = app::judgment_dataset(engine, qf, app::filter_labels(labels, held, true));

  rank::LambdaMartConfig lc;
  lc.seed = 35;
  const auto& reg = idx->registry();
  const auto model = rank::lambdamart_train(train.data, lc, reg.names(), reg.digest().hex()).model;
  const auto r = app::evaluate_ranker(model, train.data, test.data, reg);
  std::ostringstream base;
  for (const auto& b : r.baselines) base << ' ' << b.feature << ' ' << fmt("%.4f", b.ndcg);
  return {r.model_wins(),
          fmt("NDCG@5 on %zu held-out queries: LambdaMART %.4f vs best single feature %s %.4f;",
              r.test_queries, r.model_ndcg, r.best_feature.c_str(), r.best_baseline) +
              base.str()};
}

Outcome triplet() {
  testing::SplitMix64 rng(808);
  const auto vec = [&](std::size_t d, double scale) {
    std::vector<float> v(d);
    for (auto& x : v) x = static_cast<float>(scale * rng.gaussian());
    return v;
  };
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t d = 6 + inst % 5, m = 3 + inst % 4;
    feature::TripletEmbeddingModel model;
    model.margin = 0.5f;
    model.projection = Matrix(m, d);
    for (auto& v : model.projection.data) v = static_cast<float>(rng.gaussian());
    std::vector<feature::Triplet> batch;
    for (int i = 0; i < 4; ++i) batch.push_back({vec(d, 1), vec(d, 1), vec(d, 1)});
    const auto analytic = feature::triplet_loss(model, batch);
    for (std::size_t k = 0; k < model.projection.data.size(); ++k) {
      auto plus = model, minus = model;
      plus.projection.data[k] += 1e-4f;
      minus.projection.data[k] -= 1e-4f;
      const double step = double(plus.projection.data[k]) - double(minus.projection.data[k]);
      const double numeric =
          (feature::triplet_loss(plus, batch).loss - feature::triplet_loss(minus, batch).loss) /
          step;
      const double g = analytic.gradient.data[k];
      // Coordinates with a vanishing gradient have no meaningful relative error.
      if (std::abs(g) < 1e-3) continue;
      ++checked;
      const double rel = std::abs(numeric - g) / std::abs(g);
      worst = std::max(worst, rel);
      bad += rel > 1e-4;
    }
  }

  const std::size_t d = 16;
  const auto ca = vec(d, 1.0), cb = vec(d, 1.0);
  const auto sample = [&](const std::vector<float>& c) {
    auto v = vec(d, 0.6);
    for (std::size_t j = 0; j < d; ++j) v[j] += c[j];
    return v;
  };
  std::vector<feature::Triplet> train;
  for (int i = 0; i < 400; ++i) {
    const bool a = rng.next() % 2 == 0;
    train.push_back({sample(a ? ca : cb), sample(a ? ca : cb), sample(a ? cb : ca)});
  }
  feature::TripletTrainConfig tc;
  tc.seed = 3;
  tc.epochs = 60;
  const auto r = feature::triplet_train(train, 8, tc);
  const double first = r.loss_history.front(), last = r.loss_history.back();
  return {bad == 0 && checked > 500 && last <= 0.5 * first,
          fmt("gradient: %zu coordinates over 100 instances, worst relative error %.2e; "
              "training loss %.4f -> %.4f (x%.3f)",
              checked, worst, first, last, last / first)};
}

Outcome adc_oracle() {
  testing::SplitMix64 rng(4242);
  const auto gaussian = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = static_cast<float>(rng.gaussian());
    return m;
  };
  const auto train = gaussian(10000, 100);
  const auto cb = quantize::pq_train(train, 25, 256, {.seed = 7});
  const auto a = gaussian(1000, 100);
  const auto b = gaussian(1000, 100);
  double worst = 0.0;
  std::vector<double> adc, exact;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto table = quantize::pq_distance_table(cb, a.row(i));
    const auto code = quantize::pq_encode(cb, b.row(i));
    const double d = quantize::pq_adc_distance(table, code);
    const auto recon = quantize::pq_decode(cb, code);
    double ref = 0.0;
    for (std::size_t j = 0; j < recon.size(); ++j) {
      const double diff = double(a(i, j)) - recon[j];
      ref += diff * diff;
    }
    worst = std::max(worst, std::abs(d - ref) / std::max(1.0, ref));
    double truth = 0.0;
    for (std::size_t j = 0; j < 100; ++j) {
      const double diff = double(a(i, j)) - b(i, j);
      truth += diff * diff;
    }
    adc.push_back(d);
    exact.push_back(truth);
  }
  const double rho = testing::spearman(adc, exact);
  return {worst <= 1e-5 && rho >= 0.9,
          fmt("1000 pairs: max relative |ADC - exact-to-reconstruction| %.2e; Spearman vs true "
              "distance %.4f",
              worst, rho)};
}

Outcome ndcg_suite() {
  const std::vector<int> ideal = {4, 3, 3, 1, 0};
  bool ok = rank::ndcg_at_k(ideal, ideal, 5) == 1.0;
  const std::vector<int> three = {1, 3, 0};
  const double hand = (1.0 + 7.0 / std::log2(3.0)) / (7.0 + 1.0 / std::log2(3.0));
  const double got = rank::ndcg_at_k(three, three, 3);
  ok = ok && std::abs(got - hand) < 1e-12;

  // Every 5-doc grade vector in {0..2}^5, every ordering: NDCG is 1 exactly
  // when the ranked grades are non-increasing.
  std::size_t instances = 0, perms = 0, wrong = 0;
  for (int code = 0; code < 243; ++code) {
    std::vector<int> grades(5);
    for (int i = 0, c = code; i < 5; ++i, c /= 3) grades[i] = c % 3;
    if (std::all_of(grades.begin(), grades.end(), [](int g) { return g == 0; })) continue;
    ++instances;
    std::vector<int> order = {0, 1, 2, 3, 4};
    do {
      std::vector<int> ranked(5);
      for (int i = 0; i < 5; ++i) ranked[i] = grades[order[i]];
      const bool sorted = std::is_sorted(ranked.rbegin(), ranked.rend());
      const bool one = std::abs(rank::ndcg_at_k(ranked, grades, 5) - 1.0) < 1e-12;
      wrong += sorted != one;
      ++perms;
    } while (std::next_permutation(order.begin(), order.end()));
  }
  ok = ok && wrong == 0;
  return {ok, fmt("ideal 1.0, hand 3-doc %.12f; %zu grade vectors x 120 orders (%zu): %zu "
                  "disagreements with label-sorted",
                  got, instances, perms, wrong)};
}

Outcome roundtrip_dedup() {
  auto spec = testing::small_spec(30, 60, 44);
  spec.exact_dup_rate = 0.05;
  spec.near_dup_rate = 0.05;
  const app::SyntheticWorld world(spec);
  const auto corpus = world.corpus();
  auto cfg = testing::small_build_config(3);
  const auto built = share(testing::build_index(corpus.docs, cfg));
  testing::TempDir dir;
  built->save(dir.path());
  const auto loaded = share(index::Index::load(dir.path()));
  const retrieve::SearchEngine a(built), b(loaded);

  // Queries: fresh samples plus the sources of planted duplicates.
  std::vector<feature::FeatureBundle> qs;
  for (const auto& d : world.queries(25, 45).docs) qs.push_back(d.features);
  for (std::size_t i = 0; i < corpus.docs.size() && qs.size() < 50; ++i) {
    if (corpus.hidden[i].duplicate_of) qs.push_back(corpus.docs[i].features);
  }
  std::size_t mismatched = 0, dedup_bad = 0, collapsed = 0;
  for (const auto& f : qs) {
    retrieve::Query q;
    q.features = f;
    q.top_k = 20;
    q.cascade.l1_keep = 200;
    const auto ra = a.search(q);
    mismatched += !same_results(ra, b.search(q));

    // Oracle: full L2 list without dedup, grouped by depth-first search.
    retrieve::Query all = q;
    all.dedup = false;
    all.top_k = q.cascade.l1_keep;
    const auto full = a.search(all).results;
    std::vector<retrieve::DedupKey> keys;
    for (const auto& r : full) {
      const auto doc = a.doc_features(r.doc_id);
      keys.push_back({doc->digest, doc->phash});
    }
    const auto linked = [&](std::size_t i, std::size_t j) {
      if (keys[i].digest && keys[j].digest && *keys[i].digest == *keys[j].digest) return true;
      return keys[i].phash && keys[j].phash &&
             std::popcount(*keys[i].phash ^ *keys[j].phash) <= 6;
    };
    std::vector<int> group(full.size(), -1);
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < full.size(); ++s) {
      if (group[s] >= 0) continue;
      std::vector<std::size_t> stack = {s};
      group[s] = static_cast<int>(sizes.size());
      std::size_t size = 0;
      while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        ++size;
        for (std::size_t v = 0; v < full.size(); ++v) {
          if (group[v] < 0 && linked(u, v)) {
            group[v] = group[s];
            stack.push_back(v);
          }
        }
      }
      sizes.push_back(size);
    }
    // The first member of each group in score order represents it.
    std::vector<std::pair<std::uint64_t, std::size_t>> expect;
    std::set<int> seen;
    for (std::size_t i = 0; i < full.size() && expect.size() < q.top_k; ++i) {
      if (seen.insert(group[i]).second) expect.emplace_back(full[i].doc_id, sizes[group[i]] - 1);
    }
    bool ok = expect.size() == ra.results.size();
    for (std::size_t i = 0; ok && i < expect.size(); ++i) {
      ok = ra.results[i].doc_id == expect[i].first && ra.results[i].duplicates == expect[i].second;
      collapsed += ra.results[i].duplicates;
    }
    dedup_bad += !ok;
  }
  return {mismatched == 0 && dedup_bad == 0 && collapsed > 0,
          fmt("%zu queries: save/load mismatches %zu; dedup disagreements with union-find "
              "oracle %zu; duplicates collapsed %zu",
              qs.size(), mismatched, dedup_bad, collapsed)};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"compression", compression},
      {"pq_fidelity", pq_fidelity},
      {"cascade_correctness", cascade_correctness},
      {"cascade_efficiency", cascade_efficiency},
      {"ranker_lift", ranker_lift},
      {"triplet", triplet},
      {"adc_oracle", adc_oracle},
      {"ndcg_suite", ndcg_suite},
      {"roundtrip_dedup", roundtrip_dedup},
  };
  return all;
}

}  // namespace
}  // namespace viscade::acceptance

int main(int argc, char** argv) {
  using namespace viscade::acceptance;
  CLI::App app{"Acceptance criteria runner"};
  std::vector<std::string> selected;
  bool list = false;
  app.add_option("--criterion", selected, "Criterion to run (repeatable; default all)");
  app.add_flag("--list", list, "Print criterion names");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  if (list) {
    for (const auto& [name, _] : criteria()) std::cout << name << '\n';
    return 0;
  }
  for (const auto& s : selected) {
    const bool known = std::any_of(criteria().begin(), criteria().end(),
                                   [&](const auto& c) { return c.first == s; });
    if (!known) {
      std::cerr << "unknown criterion " << s << '\n';
      return 2;
    }
  }
  bool all_pass = true;
  for (const auto& [name, fn] : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " ["
              << std::fixed << std::setprecision(1) << s << " s]" << std::endl;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
