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

#include "viscade/app/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "viscade/core/digest.h"
#include "viscade/core/error.h"
#include "viscade/core/thread_pool.h"

namespace viscade::app {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + kGolden * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr const char* kSyllables[16] = {"ka", "lo", "mi", "ra", "ve", "to", "su", "ne",
                                        "pa", "di", "go", "ze", "ri", "fa", "bu", "ho"};

constexpr const char* kCategoryNames[] = {"shoes",  "lamps",  "chairs", "bags",
                                          "dresses", "watches", "tables", "rugs",
                                          "mugs",   "jackets", "vases",  "clocks"};

// Bijective on [0, 65536): distinct indices give distinct words.
std::string pseudo_word(std::size_t index) {
  const std::uint32_t code = static_cast<std::uint32_t>(index * 2654435761ULL) & 0xffff;
  std::string word;
  for (int i = 0; i < 4; ++i) word += kSyllables[(code >> (4 * i)) & 0xf];
  return word;
}

float clamp_channel(double v) { return static_cast<float>(std::clamp(v, 0.0, 255.0)); }

}  // namespace

CorpusSpec CorpusSpec::from_kv(const KvConfig& kv) {
  CorpusSpec s;
  auto size = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    require(v >= 0, ErrorCode::kConfig, std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  s.clusters = size("synth.clusters", s.clusters);
  s.docs_per_cluster = size("synth.docs_per_cluster", s.docs_per_cluster);
  s.dim = size("synth.dim", s.dim);
  s.latent_dim = size("synth.latent_dim", s.latent_dim);
  s.noise_sigma = kv.get_double("synth.noise", s.noise_sigma);
  s.cluster_spread = kv.get_double("synth.spread", s.cluster_spread);
  s.aux_dim = size("synth.aux_dim", s.aux_dim);
  s.aux_noise = kv.get_double("synth.aux_noise", s.aux_noise);
  s.categories = size("synth.categories", s.categories);
  s.category_flip = kv.get_double("synth.category_flip", s.category_flip);
  s.near_dup_rate = kv.get_double("synth.near_dup_rate", s.near_dup_rate);
  s.exact_dup_rate = kv.get_double("synth.exact_dup_rate", s.exact_dup_rate);
  s.family = kv.get_string("synth.family", s.family);
  s.aux_family = kv.get_string("synth.aux_family", s.aux_family);
  s.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", static_cast<long long>(s.seed)));
  return s;
}

SyntheticWorld::SyntheticWorld(CorpusSpec spec) : spec_(std::move(spec)) {
  require(spec_.clusters > 0 && spec_.dim > 0 && spec_.latent_dim > 0, ErrorCode::kConfig,
          "synthetic corpus needs clusters, dim and latent_dim > 0");
  require(spec_.categories > 0, ErrorCode::kConfig, "synthetic corpus needs categories > 0");
  require(spec_.clusters * spec_.keywords_per_cluster + 64 <= 65536, ErrorCode::kConfig,
          "too many clusters for the keyword vocabulary");
  std::mt19937_64 rng(mix(spec_.seed, 0x5eed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  centers_ = Matrix(spec_.clusters, spec_.latent_dim);
  for (auto& v : centers_.data) v = static_cast<float>(normal(rng));
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec_.latent_dim));
  map_ = Matrix(spec_.dim, spec_.latent_dim);
  for (auto& v : map_.data) v = static_cast<float>(map_scale * normal(rng));
  aux_map_ = Matrix(spec_.aux_dim, spec_.latent_dim);
  for (auto& v : aux_map_.data) v = static_cast<float>(map_scale * normal(rng));

  cluster_colors_.resize(spec_.clusters);
  cluster_category_.resize(spec_.clusters);
  for (std::size_t c = 0; c < spec_.clusters; ++c) {
    for (auto& ch : cluster_colors_[c]) ch = static_cast<float>(255.0 * unit(rng));
    cluster_category_[c] = static_cast<std::uint32_t>(rng() % spec_.categories);
  }
  for (std::size_t c = 0; c < spec_.categories; ++c) {
    const std::size_t base = std::size(kCategoryNames);
    category_names_.push_back(c < base ? kCategoryNames[c]
                                       : std::string(kCategoryNames[c % base]) +
                                             std::to_string(c / base));
  }
  std::size_t next_word = 0;
  keywords_.resize(spec_.clusters);
  for (auto& words : keywords_) {
    for (std::size_t k = 0; k < spec_.keywords_per_cluster; ++k) {
      words.push_back(pseudo_word(next_word++));
    }
  }
  for (int g = 0; g < 40; ++g) generic_words_.push_back(pseudo_word(next_word++));
}

std::vector<float> SyntheticWorld::embed(const Matrix& map, std::span<const float> latent,
                                         double noise, std::uint64_t stream) const {
  std::mt19937_64 rng(stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> out(map.rows);
  for (std::size_t i = 0; i < map.rows; ++i) {
    double acc = 0.0;
    const auto row = map.row(i);
    for (std::size_t j = 0; j < latent.size(); ++j) acc += row[j] * latent[j];
    out[i] = static_cast<float>(acc + noise * normal(rng));
  }
  return out;
}

index::ImageDoc SyntheticWorld::make_doc(std::uint64_t id, std::uint32_t cluster,
                                         HiddenState* hidden) const {
  require(cluster < spec_.clusters, ErrorCode::kConfig, "cluster out of range");
  const std::uint64_t stream = mix(spec_.seed, id);
  std::mt19937_64 rng(stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<float> latent(spec_.latent_dim);
  const auto center = centers_.row(cluster);
  for (std::size_t j = 0; j < latent.size(); ++j) {
    latent[j] = static_cast<float>(center[j] + spec_.cluster_spread * normal(rng));
  }

  index::ImageDoc doc;
  doc.image_id = id;
  doc.source_uri = "synth://" + std::to_string(spec_.seed) + "/" + std::to_string(id);
  auto& f = doc.features;
  f.embeddings[spec_.family] = embed(map_, latent, spec_.noise_sigma, mix(stream, 1));
  if (spec_.aux_dim > 0) {
    f.embeddings[spec_.aux_family] = embed(aux_map_, latent, spec_.aux_noise, mix(stream, 2));
  }

  feature::DominantColor color;
  for (int ch = 0; ch < 3; ++ch) {
    color.rgb[ch] = clamp_channel(cluster_colors_[cluster][ch] + 30.0 * normal(rng));
  }
  color.weight = static_cast<float>(0.4 + 0.5 * unit(rng));
  f.dominant_color = color;

  std::uint32_t category = cluster_category_[cluster];
  if (spec_.categories > 1 && unit(rng) < spec_.category_flip) {
    category = (category + 1 + rng() % (spec_.categories - 1)) % spec_.categories;
  }
  doc.category = category_names_[category];
  f.category = doc.category;

  std::vector<std::size_t> order(keywords_[cluster].size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::string text;
  for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) {
    text += keywords_[cluster][order[k]] + " ";
  }
  text += category_names_[category];
  for (int g = 0; g < 2; ++g) text += " " + generic_words_[rng() % generic_words_.size()];
  doc.metadata_text = text;
  f.metadata_text = text;

  f.phash = rng();
  f.digest = md5("synth:" + std::to_string(spec_.seed) + ":" + std::to_string(id));

  if (hidden != nullptr) {
    hidden->cluster = cluster;
    hidden->latent = std::move(latent);
    hidden->duplicate_of.reset();
  }
  return doc;
}

SyntheticCorpus SyntheticWorld::corpus() const {
  const std::size_t n = spec_.size();
  SyntheticCorpus out;
  out.docs.resize(n);
  out.hidden.resize(n);
  parallel_for(n, [&](std::size_t i) {
    out.docs[i] = make_doc(spec_.first_id + i, static_cast<std::uint32_t>(i % spec_.clusters),
                           &out.hidden[i]);
  });

  // Duplicates copy an earlier member of the same cluster.
  std::mt19937_64 rng(mix(spec_.seed, 0xd0d0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = spec_.clusters; i < n; ++i) {
    const double u = unit(rng);
    const bool exact = u < spec_.exact_dup_rate;
    const bool near = !exact && u < spec_.exact_dup_rate + spec_.near_dup_rate;
    if (!exact && !near) continue;
    const std::size_t src = i - spec_.clusters * (1 + rng() % (i / spec_.clusters));
    index::ImageDoc copy = out.docs[src];
    copy.image_id = out.docs[i].image_id;
    copy.source_uri = out.docs[i].source_uri;
    if (near) {
      copy.features.digest = out.docs[i].features.digest;
      std::uint64_t ph = *copy.features.phash;
      const int flips = 1 + static_cast<int>(rng() % 4);
      for (int b = 0; b < flips; ++b) ph ^= 1ULL << (rng() % 64);
      copy.features.phash = ph;
      for (auto& [name, vec] : copy.features.embeddings) {
        for (auto& v : vec) v += static_cast<float>(1e-3 * normal(rng));
      }
    }
    out.docs[i] = std::move(copy);
    out.hidden[i] = out.hidden[src];
    out.hidden[i].duplicate_of = out.docs[src].image_id;
  }
  return out;
}

SyntheticCorpus SyntheticWorld::queries(std::size_t count, std::uint64_t seed) const {
  SyntheticCorpus out;
  out.docs.resize(count);
  out.hidden.resize(count);
  std::mt19937_64 rng(mix(spec_.seed ^ seed, 0x9e71));
  for (std::size_t i = 0; i < count; ++i) {
    const auto cluster = static_cast<std::uint32_t>(rng() % spec_.clusters);
    const std::uint64_t id = kQueryIdBase + mix(seed, i) % (1ULL << 39);
    out.docs[i] = make_doc(id, cluster, &out.hidden[i]);
  }
  return out;
}

feature::RawImage render_image(const index::ImageDoc& doc, std::size_t width,
                               std::size_t height) {
  feature::RawImage img(width, height);
  std::array<float, 3> base{128.0f, 128.0f, 128.0f};
  if (doc.features.dominant_color) base = doc.features.dominant_color->rgb;
  auto channel = [&](int ch, double shift) {
    return static_cast<std::uint8_t>(clamp_channel(base[ch] + shift));
  };
  img.fill(channel(0, 0), channel(1, 0), channel(2, 0));
  std::mt19937_64 rng(mix(doc.image_id, 0x1a4e));
  for (int r = 0; r < 6; ++r) {
    const std::size_t x0 = rng() % width;
    const std::size_t y0 = rng() % height;
    const std::size_t x1 = std::min(width, x0 + 1 + rng() % (width / 2 + 1));
    const std::size_t y1 = std::min(height, y0 + 1 + rng() % (height / 2 + 1));
    std::array<double, 3> shift{};
    for (auto& s : shift) s = static_cast<double>(rng() % 241) - 120.0;
    img.fill_rect(x0, y0, x1, y1, channel(0, shift[0]), channel(1, shift[1]),
                  channel(2, shift[2]));
  }
  return img;
}

double hidden_relevance(const index::ImageDoc& query, const HiddenState& query_hidden,
                        const index::ImageDoc& doc, const HiddenState& doc_hidden,
                        const SyntheticWorld& world, const JudgmentSpec& spec) {
  const auto& ws = world.spec();
  double d2 = 0.0;
  for (std::size_t j = 0; j < query_hidden.latent.size(); ++j) {
    const double diff = query_hidden.latent[j] - doc_hidden.latent[j];
    d2 += diff * diff;
  }
  const double scale = 2.0 * ws.cluster_spread * ws.cluster_spread * ws.latent_dim;
  const double latent_sim = std::exp(-d2 / std::max(scale, 1e-12));
  const double category = (query.category && doc.category && *query.category == *doc.category)
                              ? 1.0
                              : 0.0;
  double color_sim = 0.0;
  const auto& qc = query.features.dominant_color;
  const auto& dc = doc.features.dominant_color;
  if (qc && dc) {
    double c2 = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      const double diff = qc->rgb[ch] - dc->rgb[ch];
      c2 += diff * diff;
    }
    color_sim = 1.0 - std::sqrt(c2) / (255.0 * std::sqrt(3.0));
  }
  return spec.w_latent * latent_sim + spec.w_category * category + spec.w_color * color_sim;
}

JudgmentSet generate_judgments(const SyntheticWorld& world, const SyntheticCorpus& corpus,
                               const SyntheticCorpus& queries, const JudgmentSpec& spec) {
  require(corpus.docs.size() >= 2, ErrorCode::kConfig, "judgments need at least 2 docs");
  require(spec.pool >= 2, ErrorCode::kConfig, "judgment pool must hold at least 2 docs");
  const std::size_t n = corpus.docs.size();
  std::vector<std::vector<std::size_t>> by_cluster(world.spec().clusters);
  for (std::size_t i = 0; i < n; ++i) by_cluster[corpus.hidden[i].cluster].push_back(i);

  JudgmentSet out;
  std::mt19937_64 rng(mix(spec.seed, 0x7a11));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t q = 0; q < queries.docs.size(); ++q) {
    const auto& qh = queries.hidden[q];
    const std::size_t pool_size = std::min(spec.pool, n);

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < qh.latent.size(); ++j) {
        const double diff = qh.latent[j] - corpus.hidden[i].latent[j];
        d2 += diff * diff;
      }
      dist[i] = {d2, i};
    }
    const std::size_t nearest = pool_size / 3;
    std::partial_sort(dist.begin(), dist.begin() + nearest, dist.end());

    std::vector<std::size_t> pool;
    std::unordered_set<std::size_t> seen;
    auto take = [&](std::size_t i) {
      if (pool.size() < pool_size && seen.insert(i).second) pool.push_back(i);
    };
    for (std::size_t i = 0; i < nearest; ++i) take(dist[i].second);
    const auto& members = by_cluster[qh.cluster];
    for (std::size_t t = 0; t < 4 * pool_size && pool.size() < 2 * pool_size / 3; ++t) {
      if (members.empty()) break;
      take(members[rng() % members.size()]);
    }
    while (pool.size() < pool_size) take(rng() % n);

    std::vector<double> rel(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) {
      rel[p] = hidden_relevance(queries.docs[q], qh, corpus.docs[pool[p]],
                                corpus.hidden[pool[p]], world, spec);
    }
    const std::string qid = std::to_string(queries.docs[q].image_id);
    for (std::size_t t = 0; t < spec.pairs_per_query; ++t) {
      const std::size_t a = rng() % pool.size();
      std::size_t b = rng() % (pool.size() - 1);
      if (b >= a) ++b;
      const double diff = rel[a] - rel[b] + spec.label_noise * normal(rng);
      rank::PairwiseJudgment j;
      j.query_id = qid;
      j.winner = corpus.docs[diff >= 0 ? pool[a] : pool[b]].image_id;
      j.loser = corpus.docs[diff >= 0 ? pool[b] : pool[a]].image_id;
      j.tie = std::abs(diff) < spec.tie_band;
      out.judgments.push_back(std::move(j));
    }
    auto& ids = out.pools[queries.docs[q].image_id];
    for (std::size_t i : pool) ids.push_back(corpus.docs[i].image_id);
  }
  return out;
}

}  // namespace viscade::app
