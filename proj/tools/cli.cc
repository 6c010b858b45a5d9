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

#include "cli.h"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "viscade/app/corpus_io.h"
#include "viscade/app/eval.h"
#include "viscade/app/synth.h"
#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"
#include "viscade/core/kv_config.h"
#include "viscade/core/thread_pool.h"
#include "viscade/feature/extract.h"
#include "viscade/feature/pipeline.h"
#include "viscade/feature/triplet.h"
#include "viscade/index/index.h"
#include "viscade/rank/judgments.h"
#include "viscade/rank/lambdamart.h"
#include "viscade/retrieve/engine.h"
#include "viscade/service/http.h"
#include "viscade/service/service.h"

namespace viscade::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  // Shared by every subcommand.
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config;
  bool json = false;
  bool verbose = false;

  // Paths.
  std::string out, corpus, queries, index, models, pipeline, ranker, judgments, images, csv;
  std::string image, crop;

  // gen-corpus.
  std::size_t clusters = 0, per_cluster = 0, dim = 0, latent_dim = 0, aux_dim = 0;
  double near_dup_rate = -1, exact_dup_rate = -1;
  std::size_t query_count = 0, pool = 24, pairs = 120, image_size = 64;

  // train / build-index.
  std::string family, l1_family;
  std::size_t shards = 0, subspaces = 0, centroids = 0, books = 0, vocab = 0;
  bool no_raw = false;
  std::size_t out_dim = 32, triplets = 2000, epochs = 50;
  double margin = 0.2, learning_rate = -1;
  std::size_t trees = 100, leaves = 8, min_leaf = 5;
  double holdout = 0.25;

  // search / eval / bench / serve.
  std::string image_id, report = "recall", text, category, host;
  std::size_t top_k = 0, k = 10, l1_keep = 0, m_match = 0, workers = 1, repeat = 1;
  std::size_t raw_dim = 2048, reduced_dim = 0, cache = 0;
  double deadline_ms = 0;
  int port = -1;
  bool with_ranker = false, no_dedup = false;
};

KvConfig load_config(const Options& o) {
  return o.config.empty() ? KvConfig{} : KvConfig::load(o.config);
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

json envelope(const std::string& command) {
  return {{"version", app::kReportVersion}, {"command", command}};
}

std::optional<feature::CropRect> parse_crop_flag(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto parts = split_list(text);
  if (parts.size() != 4) throw UsageError("--crop expects x0,y0,x1,y1");
  feature::CropRect c;
  try {
    c.x0 = std::stod(parts[0]);
    c.y0 = std::stod(parts[1]);
    c.x1 = std::stod(parts[2]);
    c.y1 = std::stod(parts[3]);
  } catch (const std::exception&) {
    throw UsageError("--crop values must be numbers");
  }
  return c;
}

feature::PipelineConfig load_pipeline(const Options& o) {
  return o.pipeline.empty() ? feature::PipelineConfig::defaults()
                            : feature::PipelineConfig::load(o.pipeline);
}

index::IndexBuildConfig build_config(const Options& o, const KvConfig& kv) {
  auto c = index::IndexBuildConfig::from_kv(kv);
  if (o.shards) c.shards = static_cast<std::uint32_t>(o.shards);
  if (!o.l1_family.empty()) c.l1_family = o.l1_family;
  if (o.subspaces) c.pq_subspaces = o.subspaces;
  if (o.centroids) c.pq_k = o.centroids;
  if (o.books) c.vw_books = o.books;
  if (o.vocab) c.vw_vocab = o.vocab;
  if (o.no_raw) c.store_raw = false;
  if (o.seed_given) c.seed = o.seed;
  return c;
}

// Picks the L1 family when neither flags nor config name one.
void resolve_l1(index::IndexBuildConfig& c, const Options& o,
                std::span<const index::ImageDoc> docs) {
  if (!c.l1_family.empty()) return;
  if (!o.pipeline.empty()) {
    c.l1_family = feature::PipelineConfig::load(o.pipeline, false).l1_family();
    return;
  }
  const auto fams = index::families_in(docs);
  if (fams.size() != 1) {
    throw UsageError("--l1-family is required when the corpus has " +
                     std::to_string(fams.size()) + " embedding families");
  }
  c.l1_family = fams.front();
}

struct QuerySet {
  std::vector<feature::FeatureBundle> features;
  std::vector<std::string> ids;
};

QuerySet load_queries(const std::string& dir) {
  if (dir.empty()) throw UsageError("--queries is required");
  QuerySet q;
  for (auto& d : app::load_corpus(dir)) {
    q.ids.push_back(std::to_string(d.image_id));
    q.features.push_back(std::move(d.features));
  }
  return q;
}

std::shared_ptr<const index::Index> open_index(const Options& o) {
  if (o.index.empty()) throw UsageError("--index is required");
  return std::make_shared<const index::Index>(index::Index::load(o.index));
}

std::optional<rank::RankingModel> open_ranker(const Options& o, bool fallback_to_index) {
  if (!o.ranker.empty()) return rank::RankingModel::load(o.ranker);
  const fs::path stored = fs::path(o.index) / "models" / "ranker.json";
  if (fallback_to_index && fs::exists(stored)) return rank::RankingModel::load(stored);
  return std::nullopt;
}

retrieve::CascadeConfig cascade_config(const Options& o, const KvConfig& kv) {
  retrieve::CascadeConfig c;
  c.l1_keep = static_cast<std::size_t>(kv.get_int("cascade.l1_keep", long(c.l1_keep)));
  c.m_match = static_cast<std::size_t>(kv.get_int("cascade.m_match", long(c.m_match)));
  if (o.l1_keep) c.l1_keep = o.l1_keep;
  if (o.m_match) c.m_match = o.m_match;
  return c;
}

// Pixel features from the rendered image, keeping generator families the
// pipeline does not compute.
void extract_into(index::ImageDoc& doc, const feature::RawImage& image,
                  const std::optional<feature::CropRect>& crop,
                  const feature::PipelineConfig& pipeline) {
  feature::ExtractInputs inputs;
  inputs.external.insert(doc.features.embeddings.begin(), doc.features.embeddings.end());
  inputs.category = doc.category;
  if (!doc.metadata_text.empty()) inputs.metadata_text = doc.metadata_text;
  auto bundle = feature::extract_features(image, crop, pipeline, inputs);
  for (auto& [name, v] : doc.features.embeddings) bundle.embeddings.try_emplace(name, std::move(v));
  doc.features = std::move(bundle);
}

void render_and_extract(std::vector<index::ImageDoc>& docs, const fs::path& image_dir,
                        std::size_t size, const feature::PipelineConfig& pipeline) {
  fs::create_directories(image_dir);
  parallel_for(docs.size(), [&](std::size_t i) {
    auto& doc = docs[i];
    const auto image = app::render_image(doc, size, size);
    const fs::path path = fs::absolute(image_dir / (std::to_string(doc.image_id) + ".png"));
    write_file_bytes(path, feature::encode_png(image));
    doc.source_uri = path.string();
    extract_into(doc, image, std::nullopt, pipeline);
  });
}

int cmd_gen_corpus(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  auto spec = app::CorpusSpec::from_kv(load_config(o));
  if (o.clusters) spec.clusters = o.clusters;
  if (o.per_cluster) spec.docs_per_cluster = o.per_cluster;
  if (o.dim) spec.dim = o.dim;
  if (o.latent_dim) spec.latent_dim = o.latent_dim;
  if (o.aux_dim) spec.aux_dim = o.aux_dim;
  if (o.near_dup_rate >= 0) spec.near_dup_rate = o.near_dup_rate;
  if (o.exact_dup_rate >= 0) spec.exact_dup_rate = o.exact_dup_rate;
  if (o.seed_given) spec.seed = o.seed;
  if (!o.judgments.empty() && o.query_count == 0) {
    throw UsageError("--judgments needs --queries N");
  }

  const app::SyntheticWorld world(spec);
  auto corpus = world.corpus();
  std::optional<app::SyntheticCorpus> queries;
  if (o.query_count) queries = world.queries(o.query_count, spec.seed + 1);

  std::size_t judgment_count = 0;
  if (!o.judgments.empty()) {
    app::JudgmentSpec js;
    js.pool = o.pool;
    js.pairs_per_query = o.pairs;
    js.seed = spec.seed + 2;
    const auto set = app::generate_judgments(world, corpus, *queries, js);
    fs::create_directories(fs::path(o.out));
    rank::save_judgments(fs::path(o.out) / o.judgments, set.judgments);
    judgment_count = set.judgments.size();
  }
  if (!o.images.empty()) {
    const auto pipeline = load_pipeline(o);
    render_and_extract(corpus.docs, fs::path(o.out) / o.images, o.image_size, pipeline);
    if (queries) {
      render_and_extract(queries->docs, fs::path(o.out) / "queries" / o.images, o.image_size,
                         pipeline);
    }
  }
  app::save_corpus(o.out, corpus.docs, corpus.hidden);
  if (queries) app::save_corpus(fs::path(o.out) / "queries", queries->docs, queries->hidden);

  json j = envelope("gen-corpus");
  j["out"] = o.out;
  j["docs"] = corpus.docs.size();
  j["queries"] = queries ? queries->docs.size() : 0;
  j["judgments"] = judgment_count;
  j["seed"] = spec.seed;
  if (o.json) {
    emit(out, j);
  } else {
    out << "wrote " << corpus.docs.size() << " docs";
    if (queries) out << ", " << queries->docs.size() << " queries";
    if (judgment_count) out << ", " << judgment_count << " judgments";
    out << " to " << o.out << '\n';
  }
  return kExitOk;
}

std::vector<index::ImageDoc> docs_from_image_dir(const fs::path& dir) {
  static const std::set<std::string> kExt = {".png", ".jpg", ".jpeg"};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (e.is_regular_file() && kExt.count(ext)) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<index::ImageDoc> docs;
  std::set<std::uint64_t> used;
  for (std::size_t i = 0; i < files.size(); ++i) {
    index::ImageDoc d;
    const auto stem = files[i].stem().string();
    const bool numeric = !stem.empty() && stem.find_first_not_of("0123456789") == std::string::npos;
    d.image_id = numeric ? std::stoull(stem) : i + 1;
    require(used.insert(d.image_id).second, ErrorCode::kBuild,
            "two images map to id " + std::to_string(d.image_id));
    d.source_uri = fs::absolute(files[i]).string();
    docs.push_back(std::move(d));
  }
  return docs;
}

int cmd_extract(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.corpus.empty() == o.images.empty()) {
    throw UsageError("give exactly one of --corpus or --images");
  }
  const auto pipeline = load_pipeline(o);
  const auto crop = parse_crop_flag(o.crop);
  auto docs = o.corpus.empty() ? docs_from_image_dir(o.images) : app::load_corpus(o.corpus);
  std::vector<std::uint8_t> extracted(docs.size(), 0);
  parallel_for(docs.size(), [&](std::size_t i) {
    auto& doc = docs[i];
    const fs::path path(doc.source_uri);
    if (doc.source_uri.empty() || !fs::is_regular_file(path)) return;
    extract_into(doc, feature::decode_image(read_file_bytes(path)), crop, pipeline);
    extracted[i] = 1;
  });
  const std::size_t done = std::count(extracted.begin(), extracted.end(), 1);
  if (done < docs.size()) {
    spdlog::warn("{} of {} docs have no readable source image and keep their stored features",
                 docs.size() - done, docs.size());
  }
  const auto hidden = o.corpus.empty() ? std::vector<app::HiddenState>{} : app::load_hidden(o.corpus);
  app::save_corpus(o.out, docs, hidden);
  json j = envelope("extract");
  j["docs"] = docs.size();
  j["extracted"] = done;
  j["pipeline_digest"] = pipeline.digest().hex();
  if (o.json) {
    emit(out, j);
  } else {
    out << "extracted " << done << " of " << docs.size() << " docs into " << o.out << '\n';
  }
  return kExitOk;
}

std::vector<std::string> requested_families(const Options& o,
                                            const std::vector<std::string>& all) {
  if (o.family.empty()) return all;
  if (std::find(all.begin(), all.end(), o.family) == all.end()) {
    throw UsageError("family '" + o.family + "' is not trained for this corpus");
  }
  return {o.family};
}

int cmd_train_quantizers(const std::string& what, const Options& o, std::ostream& out) {
  if (o.corpus.empty() || o.models.empty()) throw UsageError("--corpus and --models are required");
  const auto docs = app::load_corpus(o.corpus);
  auto cfg = build_config(o, load_config(o));
  resolve_l1(cfg, o, docs);
  const auto families = index::training_families(docs, cfg);
  const fs::path dir(o.models);
  fs::create_directories(dir);

  json j = envelope("train " + what);
  json trained = json::array();
  if (what == "pca") {
    for (const auto& f : requested_families(o, families)) {
      const auto pca = index::train_family_pca(docs, f, cfg, index::family_seed(cfg, families, f));
      pca.save(dir / ("pca." + f + ".bin"));
      trained.push_back({{"family", f}, {"input_dim", pca.input_dim()}, {"output_dim", pca.output_dim()}});
    }
  } else if (what == "pq") {
    for (const auto& f : requested_families(o, families)) {
      const auto pca = feature::PCAModel::load(dir / ("pca." + f + ".bin"));
      const auto pq =
          index::train_family_pq(docs, f, pca, cfg, index::family_seed(cfg, families, f));
      write_file_bytes(dir / ("pq." + f + ".bin"), pq.serialize());
      trained.push_back({{"family", f}, {"subspaces", pq.n()}, {"centroids", pq.k()}});
    }
  } else {
    const auto pca = feature::PCAModel::load(dir / ("pca." + cfg.l1_family + ".bin"));
    const auto vw = index::train_visual_words(docs, pca, cfg,
                                              index::family_seed(cfg, families, cfg.l1_family));
    write_file_bytes(dir / "vw.bin", vw.serialize());
    trained.push_back({{"family", cfg.l1_family}, {"books", vw.books()}, {"vocab", vw.vocab()},
                       {"dim", vw.dim()}});
  }
  j["models"] = o.models;
  j["trained"] = trained;
  if (o.json) {
    emit(out, j);
  } else {
    for (const auto& t : trained) out << what << " " << t.at("family").get<std::string>() << " -> " << o.models << '\n';
  }
  return kExitOk;
}

int cmd_train_triplet(const Options& o, std::ostream& out) {
  if (o.corpus.empty() || o.out.empty()) throw UsageError("--corpus and --out are required");
  if (o.family.empty()) throw UsageError("--family is required");
  const auto docs = app::load_corpus(o.corpus);
  const auto hidden = app::load_hidden(o.corpus);

  // Group docs by ground-truth cluster when known, else by category.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].features.embedding(o.family)) continue;
    std::string label;
    if (hidden.size() == docs.size()) {
      label = std::to_string(hidden[i].cluster);
    } else if (docs[i].category) {
      label = *docs[i].category;
    } else {
      continue;
    }
    groups[label].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> usable;
  for (const auto& [_, g] : groups) {
    if (g.size() >= 2) usable.push_back(&g);
  }
  require(usable.size() >= 2 && groups.size() >= 2, ErrorCode::kDegenerateTraining,
          "triplets need two labelled groups with at least two docs each");

  std::mt19937_64 rng(o.seed);
  std::vector<feature::Triplet> triplets;
  std::vector<std::pair<std::string, const std::vector<std::size_t>*>> all(groups.size());
  std::transform(groups.begin(), groups.end(), all.begin(),
                 [](const auto& kv) { return std::pair(kv.first, &kv.second); });
  const auto pick = [&](const std::vector<std::size_t>& g) {
    return g[std::uniform_int_distribution<std::size_t>(0, g.size() - 1)(rng)];
  };
  while (triplets.size() < o.triplets) {
    const auto* pos_group = usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)];
    const auto* neg_group = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)].second;
    if (neg_group == pos_group) continue;
    const std::size_t a = pick(*pos_group);
    std::size_t p = pick(*pos_group);
    while (p == a) p = pick(*pos_group);
    const std::size_t n = pick(*neg_group);
    triplets.push_back({*docs[a].features.embedding(o.family), *docs[p].features.embedding(o.family),
                        *docs[n].features.embedding(o.family)});
  }
  feature::TripletTrainConfig tc;
  tc.margin = static_cast<float>(o.margin);
  if (o.learning_rate > 0) tc.learning_rate = o.learning_rate;
  tc.epochs = o.epochs;
  tc.seed = o.seed;
  const auto result = feature::triplet_train(triplets, o.out_dim, tc);
  result.model.save(o.out);

  json j = envelope("train triplet");
  j["triplets"] = triplets.size();
  j["output_dim"] = o.out_dim;
  j["initial_loss"] = result.loss_history.front();
  j["final_loss"] = result.loss_history.back();
  if (o.json) {
    emit(out, j);
  } else {
    out << "triplet loss " << result.loss_history.front() << " -> " << result.loss_history.back()
        << " over " << triplets.size() << " triplets; model written to " << o.out << '\n';
  }
  return kExitOk;
}

struct SplitData {
  app::JudgmentData train;
  app::JudgmentData test;
};

SplitData judgment_split(const Options& o, const retrieve::SearchEngine& engine) {
  if (o.judgments.empty()) throw UsageError("--judgments is required");
  const auto qs = load_queries(o.queries);
  std::map<std::string, feature::FeatureBundle> qf;
  for (std::size_t i = 0; i < qs.ids.size(); ++i) qf.emplace(qs.ids[i], qs.features[i]);
  const auto labels = rank::pairwise_to_listwise(rank::load_judgments(o.judgments));
  std::vector<std::string> qids;
  for (const auto& l : labels) qids.push_back(l.query_id);
  const auto held = app::held_out_queries(qids, o.holdout, o.seed);
  SplitData s;
  s.train = app::judgment_dataset(engine, qf, app::filter_labels(labels, held, false));
  s.test = app::judgment_dataset(engine, qf, app::filter_labels(labels, held, true));
  return s;
}

json ranker_report_json(const app::RankerReport& r) {
  json j = r.to_json();
  j.erase("version");
  return j;
}

void print_ranker_report(std::ostream& out, const app::RankerReport& r) {
  out << std::fixed << std::setprecision(4);
  out << "NDCG@5 on " << r.test_queries << " held-out queries: model " << r.model_ndcg << '\n';
  for (const auto& b : r.baselines) {
    out << "  " << std::left << std::setw(16) << b.feature << ' ' << b.ndcg
        << (b.direction > 0 ? " (high first)" : " (low first)") << '\n';
  }
  out << (r.model_wins() ? "model beats " : "model does not beat ") << "best single feature "
      << r.best_feature << '\n';
  out.unsetf(std::ios::fixed);
}

int cmd_train_ranker(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  const auto index = open_index(o);
  const retrieve::SearchEngine engine(index);
  const auto split = judgment_split(o, engine);
  require(split.train.data.queries() > 0, ErrorCode::kDegenerateTraining,
          "no judged queries left for training");
  rank::LambdaMartConfig lc;
  lc.trees = o.trees;
  lc.leaves = o.leaves;
  lc.min_leaf = o.min_leaf;
  if (o.learning_rate > 0) lc.learning_rate = o.learning_rate;
  lc.seed = o.seed;
  const auto& reg = index->registry();
  const auto result = rank::lambdamart_train(split.train.data, lc, reg.names(), reg.digest().hex());
  result.model.save(o.out);

  json j = envelope("train ranker");
  j["trees"] = result.model.trees.size();
  j["train_queries"] = split.train.data.queries();
  j["train_ndcg5"] = result.train_ndcg.empty() ? 0.0 : result.train_ndcg.back();
  std::optional<app::RankerReport> report;
  if (split.test.data.queries() > 0) {
    report = app::evaluate_ranker(result.model, split.train.data, split.test.data, reg);
    j["held_out"] = ranker_report_json(*report);
  }
  if (o.json) {
    emit(out, j);
  } else {
    out << "trained " << result.model.trees.size() << " trees on " << split.train.data.queries()
        << " queries; model written to " << o.out << '\n';
    if (report) print_ranker_report(out, *report);
  }
  return kExitOk;
}

int cmd_build_index(const Options& o, std::ostream& out) {
  if (o.corpus.empty() || o.out.empty()) throw UsageError("--corpus and --out are required");
  const auto docs = app::load_corpus(o.corpus);
  auto cfg = build_config(o, load_config(o));
  resolve_l1(cfg, o, docs);
  auto models = o.models.empty()
                    ? index::train_index_models(docs, cfg)
                    : index::IndexModels::load(o.models, cfg.l1_family,
                                               index::training_families(docs, cfg));
  const auto idx = index::Index::build(docs, std::move(models), cfg);
  if (!o.ranker.empty()) {
    const auto model = rank::RankingModel::load(o.ranker);
    require(model.registry_digest.empty() || model.registry_digest == idx.registry().digest().hex(),
            ErrorCode::kConfig, "ranker was trained against a different feature registry");
  }
  const auto manifest = idx.save(o.out);
  if (!o.pipeline.empty()) {
    fs::copy_file(o.pipeline, fs::path(o.out) / "pipeline.conf", fs::copy_options::overwrite_existing);
  }
  if (!o.ranker.empty()) {
    fs::copy_file(o.ranker, fs::path(o.out) / "models" / "ranker.json",
                  fs::copy_options::overwrite_existing);
  }
  json j = envelope("build-index");
  j["out"] = o.out;
  j["docs"] = manifest.doc_count;
  j["shards"] = manifest.shards;
  j["l1_family"] = manifest.l1_family;
  j["registry_digest"] = idx.registry().digest().hex();
  if (o.json) {
    emit(out, j);
  } else {
    out << "indexed " << manifest.doc_count << " docs in " << manifest.shards
        << " shards at " << o.out << " (L1 family " << manifest.l1_family << ")\n";
  }
  return kExitOk;
}

service::ServiceConfig service_config(const Options& o) {
  auto c = service::ServiceConfig::from_kv(load_config(o));
  if (!o.index.empty()) c.index_path = o.index;
  if (!o.pipeline.empty()) c.pipeline_path = o.pipeline;
  if (!o.ranker.empty()) c.ranker_path = o.ranker;
  if (!o.host.empty()) c.host = o.host;
  if (o.port >= 0) c.port = o.port;
  if (o.cache) c.cache_capacity = o.cache;
  if (o.l1_keep) c.l1_keep = o.l1_keep;
  if (o.m_match) c.m_match = o.m_match;
  if (c.index_path.empty()) throw UsageError("--index is required");
  return c;
}

int cmd_search(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.image_id.empty() == o.image.empty()) {
    throw UsageError("give exactly one of --image-id or --image");
  }
  const auto svc = service::SearchService::open(service_config(o));
  const auto crop = parse_crop_flag(o.crop);
  service::HttpReply reply;
  if (!o.image_id.empty()) {
    json body;
    try {
      body["image_id"] = std::stoull(o.image_id);
    } catch (const std::exception&) {
      throw UsageError("--image-id must be an unsigned integer");
    }
    if (o.top_k) body["top_k"] = o.top_k;
    if (crop) body["crop"] = {{"x0", crop->x0}, {"y0", crop->y0}, {"x1", crop->x1}, {"y1", crop->y1}};
    if (!o.text.empty()) body["metadata_text"] = o.text;
    if (!o.category.empty()) body["category"] = o.category;
    if (o.deadline_ms > 0) body["deadline_ms"] = o.deadline_ms;
    reply = svc->handle_search_json(body.dump());
  } else {
    service::UploadFields fields;
    fields.crop = crop;
    if (o.top_k) fields.top_k = o.top_k;
    if (o.deadline_ms > 0) fields.deadline_ms = o.deadline_ms;
    if (!o.text.empty()) fields.metadata_text = o.text;
    if (!o.category.empty()) fields.category = o.category;
    const auto bytes = read_file_bytes(o.image);
    reply = svc->handle_search_upload(std::string(bytes.begin(), bytes.end()), fields);
  }
  const json body = json::parse(reply.body);
  if (reply.status != 200) {
    const auto& e = body.at("error");
    err << "error [" << e.at("code").get<std::string>() << "]: " << e.at("message").get<std::string>()
        << '\n';
    return kExitRuntime;
  }
  if (o.json) {
    emit(out, body);
    return kExitOk;
  }
  const auto& d = body.at("diagnostics");
  out << "L0 " << d.at("l0_count") << "  L1 " << d.at("l1_count") << "  L2 " << d.at("l2_count")
      << (body.at("partial").get<bool>() ? "  (partial)" : "") << '\n';
  std::size_t rank = 1;
  for (const auto& r : body.at("results")) {
    out << std::setw(3) << rank++ << "  " << std::setw(12) << r.at("doc_id").get<std::uint64_t>()
        << "  " << std::setw(12) << r.at("score").get<double>() << "  "
        << r.value("category", "-") << "  " << r.at("metadata_text").get<std::string>() << '\n';
  }
  return kExitOk;
}

int eval_compression(const Options& o, std::ostream& out) {
  std::vector<std::pair<std::string, app::CompressionReport>> reports;
  if (!o.index.empty()) {
    const auto idx = open_index(o);
    for (const auto& [family, q] : idx->models().quantizers) {
      reports.emplace_back(family, app::compression_report(q.pca.input_dim(), q.pca.output_dim(),
                                                           q.pq.n(), q.pq.k()));
    }
  } else {
    const std::size_t n = o.subspaces ? o.subspaces : 25;
    const std::size_t reduced = o.reduced_dim ? o.reduced_dim : 4 * n;
    reports.emplace_back("", app::compression_report(o.raw_dim, reduced, n, o.centroids ? o.centroids : 256));
  }
  if (o.json) {
    json j = envelope("eval");
    j["report"] = "compression";
    json arr = json::array();
    for (const auto& [family, r] : reports) {
      json item = r.to_json();
      item.erase("version");
      item.erase("report");
      if (!family.empty()) item["family"] = family;
      arr.push_back(item);
    }
    j["families"] = arr;
    emit(out, j);
    return kExitOk;
  }
  for (const auto& [family, r] : reports) {
    if (!family.empty()) out << family << ": ";
    out << "raw " << r.raw_dim << " x float32 = " << r.raw_bytes << " bytes; PCA " << r.reduced_dim
        << " dims; PQ " << r.subspaces << " x " << r.centroids << " = " << r.code_bytes
        << " bytes; ratio " << r.ratio << " (" << r.display << ")\n";
  }
  return kExitOk;
}

int eval_recall(const Options& o, const KvConfig& kv, std::ostream& out) {
  const auto idx = open_index(o);
  const retrieve::SearchEngine engine(idx, o.with_ranker ? open_ranker(o, true) : std::nullopt);
  const auto qs = load_queries(o.queries);
  const auto r = app::cascade_recall(engine, qs.features, o.k, cascade_config(o, kv));
  if (o.json) {
    json j = r.to_json();
    j["command"] = "eval";
    emit(out, j);
  } else {
    out << "recall@" << r.k << " vs exact search over " << r.queries << " queries: " << r.recall
        << "\nmean L0 " << r.mean_l0 << ", mean L1 " << r.mean_l1 << "\ncascade p50 "
        << r.cascade_ms.p50 << " ms, exact p50 " << r.exact_ms.p50 << " ms, speedup "
        << r.speedup << "x\n";
  }
  return kExitOk;
}

int eval_fidelity(const Options& o, const KvConfig& kv, std::ostream& out) {
  if (o.corpus.empty()) throw UsageError("--corpus is required");
  const auto docs = app::load_corpus(o.corpus);
  auto cfg = build_config(o, kv);
  resolve_l1(cfg, o, docs);
  const std::string family = o.family.empty() ? cfg.l1_family : o.family;
  index::FamilyQuantizer q;
  q.pca = index::train_family_pca(docs, family, cfg, cfg.seed);
  q.pq = index::train_family_pq(docs, family, q.pca, cfg, cfg.seed);
  const auto qs = load_queries(o.queries);
  Matrix base(0, q.input_dim()), queries(0, q.input_dim());
  std::vector<std::uint64_t> ids;
  for (const auto& d : docs) {
    if (const auto* v = d.features.embedding(family)) {
      base.append_row(*v);
      ids.push_back(d.image_id);
    }
  }
  for (const auto& f : qs.features) {
    if (const auto* v = f.embedding(family)) queries.append_row(*v);
  }
  const auto r = app::quantization_fidelity(base, ids, queries, q, o.k);
  if (o.json) {
    json j = r.to_json();
    j["command"] = "eval";
    j["family"] = family;
    emit(out, j);
  } else {
    out << "recall@" << r.k << " vs exact raw search over " << r.queries << " queries: raw "
        << r.raw << ", PCA " << r.pca << ", PQ " << r.pq << "\nnearest neighbour in top "
        << r.k << ": raw " << r.nn_raw << ", PCA " << r.nn_pca << ", PQ " << r.nn_pq << '\n';
  }
  return kExitOk;
}

int eval_ndcg(const Options& o, std::ostream& out) {
  const auto idx = open_index(o);
  auto model = open_ranker(o, true);
  if (!model) throw UsageError("no ranker: pass --ranker or build the index with one");
  const retrieve::SearchEngine engine(idx, model);
  auto split = judgment_split(o, engine);
  // Without a held-out split the model is scored on every judged query.
  const auto& test = split.test.data.queries() > 0 ? split.test.data : split.train.data;
  const auto& train = split.train.data.queries() > 0 ? split.train.data : test;
  const auto r = app::evaluate_ranker(*model, train, test, idx->registry());
  if (o.json) {
    json j = r.to_json();
    j["command"] = "eval";
    emit(out, j);
  } else {
    print_ranker_report(out, r);
  }
  return kExitOk;
}

std::vector<retrieve::Query> bench_queries(const Options& o, const KvConfig& kv,
                                           const QuerySet& qs) {
  std::vector<retrieve::Query> queries;
  for (std::size_t r = 0; r < std::max<std::size_t>(o.repeat, 1); ++r) {
    for (const auto& f : qs.features) {
      retrieve::Query q;
      q.features = f;
      q.top_k = o.top_k ? o.top_k : o.k;
      q.cascade = cascade_config(o, kv);
      q.dedup = !o.no_dedup;
      if (o.deadline_ms > 0) q.deadline_ms = o.deadline_ms;
      queries.push_back(std::move(q));
    }
  }
  return queries;
}

json stage_summary(std::span<const app::BenchRow> rows) {
  std::map<std::string, std::vector<double>> stages;
  for (const auto& r : rows) {
    for (const auto& [name, ms] : r.stage_ms) stages[name].push_back(ms);
  }
  json j = json::object();
  for (const auto& [name, v] : stages) j[name] = app::summarize_latency(v).to_json();
  return j;
}

int cmd_latency(const Options& o, const KvConfig& kv, std::ostream& out, bool write_csv,
                const std::string& command) {
  const auto idx = open_index(o);
  const retrieve::SearchEngine engine(idx, open_ranker(o, true));
  const auto qs = load_queries(o.queries);
  const auto queries = bench_queries(o, kv, qs);
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < std::max<std::size_t>(o.repeat, 1); ++r) {
    ids.insert(ids.end(), qs.ids.begin(), qs.ids.end());
  }
  const auto rows = app::run_bench(engine, queries, ids, o.workers);
  const json stages = stage_summary(rows);
  if (write_csv && !o.csv.empty()) {
    std::ofstream f(o.csv);
    require(f.good(), ErrorCode::kIo, "cannot write " + o.csv);
    app::write_bench_csv(f, rows);
  }
  if (o.json) {
    json j = envelope(command);
    j["report"] = "latency";
    j["queries"] = rows.size();
    j["workers"] = o.workers;
    j["stages_ms"] = stages;
    if (!o.csv.empty() && write_csv) j["csv"] = o.csv;
    emit(out, j);
    return kExitOk;
  }
  if (write_csv && o.csv.empty()) {
    app::write_bench_csv(out, rows);
    return kExitOk;
  }
  out << rows.size() << " queries on " << o.workers << " workers\n";
  for (const auto& [name, s] : stages.items()) {
    out << "  " << std::left << std::setw(6) << name << " p50 " << s.at("p50").get<double>()
        << " ms  p95 " << s.at("p95").get<double>() << " ms\n";
  }
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto kv = load_config(o);
  if (o.report == "compression") return eval_compression(o, out);
  if (o.report == "recall") return eval_recall(o, kv, out);
  if (o.report == "fidelity") return eval_fidelity(o, kv, out);
  if (o.report == "ndcg") return eval_ndcg(o, out);
  if (o.report == "latency") return cmd_latency(o, kv, out, false, "eval");
  throw UsageError("unknown report '" + o.report + "'");
}

service::HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, std::ostream& err) {
  const auto cfg = service_config(o);
  std::shared_ptr<const service::SearchService> svc = service::SearchService::open(cfg);
  service::HttpServer server(svc);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  err << "serving " << svc->engine().index().doc_count() << " docs on " << cfg.host << ':'
      << cfg.port << '\n';
  server.serve(cfg.host, cfg.port);
  g_server = nullptr;
  return kExitOk;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--config", o.config, "Key-value config file")->check(CLI::ExistingFile);
  cmd->add_flag("--json", o.json, "Machine-readable output");
  cmd->add_flag("-v,--verbose", o.verbose, "Log progress to stderr");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Cascaded visual search: corpus generation, training, indexing, search"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* gen = app.add_subcommand("gen-corpus", "Generate a seeded synthetic corpus");
  gen->add_option("--out", o.out, "Output corpus directory");
  gen->add_option("--clusters", o.clusters);
  gen->add_option("--per-cluster", o.per_cluster);
  gen->add_option("--dim", o.dim);
  gen->add_option("--latent-dim", o.latent_dim);
  gen->add_option("--aux-dim", o.aux_dim);
  gen->add_option("--near-dup-rate", o.near_dup_rate);
  gen->add_option("--exact-dup-rate", o.exact_dup_rate);
  gen->add_option("--queries", o.query_count, "Also write N queries under <out>/queries");
  gen->add_option("--judgments", o.judgments, "Write pairwise judgments to <out>/<file>");
  gen->add_option("--pool", o.pool, "Judged docs per query");
  gen->add_option("--pairs", o.pairs, "Judgments per query");
  gen->add_option("--images", o.images, "Render images into <out>/<dir> and extract pixel features");
  gen->add_option("--image-size", o.image_size);
  gen->add_option("--pipeline", o.pipeline, "Feature pipeline config")->check(CLI::ExistingFile);

  auto* extract = app.add_subcommand("extract", "Extract image features into a corpus");
  extract->add_option("--corpus", o.corpus, "Corpus whose source_uri files are re-extracted");
  extract->add_option("--images", o.images, "Directory of images to ingest")->check(CLI::ExistingDirectory);
  extract->add_option("--pipeline", o.pipeline)->check(CLI::ExistingFile);
  extract->add_option("--crop", o.crop, "x0,y0,x1,y1 in [0,1]");
  extract->add_option("--out", o.out);

  auto* train = app.add_subcommand("train", "Train a model");
  train->require_subcommand(1);
  std::map<std::string, CLI::App*> trainers;
  for (const char* name : {"pca", "pq", "vw"}) {
    auto* t = train->add_subcommand(name, std::string("Train ") + name + " models into --models");
    t->add_option("--corpus", o.corpus);
    t->add_option("--models", o.models, "Model directory");
    t->add_option("--family", o.family, "Only this family (pca, pq)");
    t->add_option("--l1-family", o.l1_family);
    t->add_option("--subspaces", o.subspaces);
    t->add_option("--centroids", o.centroids);
    t->add_option("--books", o.books);
    t->add_option("--vocab", o.vocab);
    t->add_option("--pipeline", o.pipeline)->check(CLI::ExistingFile);
    trainers[name] = t;
  }
  auto* triplet = train->add_subcommand("triplet", "Train a triplet embedding projection");
  triplet->add_option("--corpus", o.corpus);
  triplet->add_option("--family", o.family, "Input family");
  triplet->add_option("--out", o.out, "Model file");
  triplet->add_option("--dim", o.out_dim, "Output dim");
  triplet->add_option("--triplets", o.triplets);
  triplet->add_option("--epochs", o.epochs);
  triplet->add_option("--margin", o.margin);
  triplet->add_option("--learning-rate", o.learning_rate);
  trainers["triplet"] = triplet;
  auto* ranker = train->add_subcommand("ranker", "Train the Level-2 ranker from judgments");
  ranker->add_option("--index", o.index);
  ranker->add_option("--queries", o.queries, "Query corpus directory");
  ranker->add_option("--judgments", o.judgments)->check(CLI::ExistingFile);
  ranker->add_option("--out", o.out, "Model JSON");
  ranker->add_option("--trees", o.trees);
  ranker->add_option("--leaves", o.leaves);
  ranker->add_option("--min-leaf", o.min_leaf);
  ranker->add_option("--learning-rate", o.learning_rate);
  ranker->add_option("--holdout", o.holdout, "Fraction of queries held out")->check(CLI::Range(0.0, 0.9));
  trainers["ranker"] = ranker;

  auto* build = app.add_subcommand("build-index", "Build a sharded index from a corpus");
  build->add_option("--corpus", o.corpus);
  build->add_option("--out", o.out);
  build->add_option("--models", o.models, "Use models from `train` instead of training");
  build->add_option("--shards", o.shards);
  build->add_option("--l1-family", o.l1_family);
  build->add_option("--subspaces", o.subspaces);
  build->add_option("--centroids", o.centroids);
  build->add_option("--books", o.books);
  build->add_option("--vocab", o.vocab);
  build->add_flag("--no-raw", o.no_raw, "Keep PQ codes only");
  build->add_option("--pipeline", o.pipeline, "Copied to <out>/pipeline.conf")->check(CLI::ExistingFile);
  build->add_option("--ranker", o.ranker, "Copied to <out>/models/ranker.json")->check(CLI::ExistingFile);

  auto* search = app.add_subcommand("search", "Query an index");
  search->add_option("--index", o.index);
  search->add_option("--image-id", o.image_id);
  search->add_option("--image", o.image)->check(CLI::ExistingFile);
  search->add_option("--crop", o.crop, "x0,y0,x1,y1 in [0,1]");
  search->add_option("--top-k", o.top_k);
  search->add_option("--text", o.text, "Query metadata text");
  search->add_option("--category", o.category);
  search->add_option("--deadline-ms", o.deadline_ms);
  search->add_option("--pipeline", o.pipeline)->check(CLI::ExistingFile);
  search->add_option("--ranker", o.ranker)->check(CLI::ExistingFile);
  search->add_option("--l1-keep", o.l1_keep);
  search->add_option("--m-match", o.m_match);

  auto* eval = app.add_subcommand("eval", "Evaluation reports");
  eval->add_option("--report", o.report)
      ->check(CLI::IsMember({"compression", "recall", "fidelity", "ndcg", "latency"}));
  eval->add_option("--index", o.index);
  eval->add_option("--corpus", o.corpus);
  eval->add_option("--queries", o.queries);
  eval->add_option("--judgments", o.judgments)->check(CLI::ExistingFile);
  eval->add_option("--ranker", o.ranker)->check(CLI::ExistingFile);
  eval->add_flag("--with-ranker", o.with_ranker, "Rank recall results with the index's ranker");
  eval->add_option("--holdout", o.holdout)->check(CLI::Range(0.0, 0.9));
  eval->add_option("--family", o.family);
  eval->add_option("--l1-family", o.l1_family);
  eval->add_option("--k", o.k);
  eval->add_option("--raw-dim", o.raw_dim);
  eval->add_option("--reduced-dim", o.reduced_dim);
  eval->add_option("--subspaces", o.subspaces);
  eval->add_option("--centroids", o.centroids);
  eval->add_option("--l1-keep", o.l1_keep);
  eval->add_option("--m-match", o.m_match);
  eval->add_option("--workers", o.workers);
  eval->add_option("--repeat", o.repeat);

  auto* serve = app.add_subcommand("serve", "Run the HTTP search service");
  serve->add_option("--index", o.index);
  serve->add_option("--host", o.host);
  serve->add_option("--port", o.port);
  serve->add_option("--pipeline", o.pipeline)->check(CLI::ExistingFile);
  serve->add_option("--ranker", o.ranker)->check(CLI::ExistingFile);
  serve->add_option("--cache", o.cache, "Query-feature cache entries");
  serve->add_option("--l1-keep", o.l1_keep);
  serve->add_option("--m-match", o.m_match);

  auto* bench = app.add_subcommand("bench", "Concurrent query benchmark; writes per-query CSV");
  bench->add_option("--index", o.index);
  bench->add_option("--queries", o.queries);
  bench->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
  bench->add_option("--repeat", o.repeat);
  bench->add_option("--top-k", o.top_k);
  bench->add_option("--ranker", o.ranker)->check(CLI::ExistingFile);
  bench->add_option("--csv", o.csv, "CSV path (stdout when omitted)");
  bench->add_option("--deadline-ms", o.deadline_ms);
  bench->add_option("--l1-keep", o.l1_keep);
  bench->add_option("--m-match", o.m_match);
  bench->add_flag("--no-dedup", o.no_dedup);

  std::vector<CLI::App*> leaves = {gen, extract, build, search, eval, serve, bench};
  for (auto& [_, t] : trainers) leaves.push_back(t);
  for (auto* cmd : leaves) add_common(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help requests surface as ParseError with exit code 0.
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  }

  for (auto* cmd : leaves) {
    if (cmd->parsed() && cmd->count("--seed") > 0) o.seed_given = true;
  }
  auto logger = spdlog::stderr_color_mt("viscade-cli-" + std::to_string(reinterpret_cast<std::uintptr_t>(&o)));
  logger->set_level(o.verbose ? spdlog::level::info : spdlog::level::warn);
  const auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> previous;
    std::shared_ptr<spdlog::logger> mine;
    ~Restore() {
      spdlog::set_default_logger(previous);
      spdlog::drop(mine->name());
    }
  } restore{previous, logger};

  try {
    if (gen->parsed()) return cmd_gen_corpus(o, out);
    if (extract->parsed()) return cmd_extract(o, out);
    if (build->parsed()) return cmd_build_index(o, out);
    if (search->parsed()) return cmd_search(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out);
    if (serve->parsed()) return cmd_serve(o, err);
    if (bench->parsed()) return cmd_latency(o, load_config(o), out, true, "bench");
    for (const char* name : {"pca", "pq", "vw"}) {
      if (trainers[name]->parsed()) return cmd_train_quantizers(name, o, out);
    }
    if (trainers["triplet"]->parsed()) return cmd_train_triplet(o, out);
    if (trainers["ranker"]->parsed()) return cmd_train_ranker(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace viscade::cli
