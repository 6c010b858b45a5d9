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

#ifndef VISCADE_RETRIEVE_CASCADE_H_
#define VISCADE_RETRIEVE_CASCADE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viscade/feature/feature_bundle.h"
#include "viscade/index/shard.h"
#include "viscade/quantize/pq.h"
#include "viscade/quantize/visual_words.h"

namespace viscade::retrieve {

struct CascadeConfig {
  std::size_t m_match = 1;
  std::size_t l1_keep = 1000;
  std::string l1_family;  // empty: the index's L1 family
  bool l2_exact = true;   // raw vectors in L2 when stored, else PQ reconstructions
};

struct Query {
  feature::FeatureBundle features;
  std::size_t top_k = 10;
  CascadeConfig cascade;
  std::optional<double> deadline_ms;
  bool dedup = true;
  int phash_threshold = 6;
  bool trace = false;  // keep per-stage id sets in the response
};

struct Candidate {
  std::uint64_t doc_id = 0;
  float l1_distance = 0.0f;
  std::uint32_t shard = 0;
  std::size_t ordinal = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Ascending distance, then ascending id.
inline bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.l1_distance != b.l1_distance) return a.l1_distance < b.l1_distance;
  return a.doc_id < b.doc_id;
}

struct ShardResponse {
  std::uint32_t shard_id = 0;
  std::vector<Candidate> candidates;
  bool complete = true;
  std::size_t l0_count = 0;
  std::size_t skipped_missing_code = 0;
  std::vector<std::uint64_t> l0_ids;  // filled only when tracing
};

// Ordinals of docs sharing at least m_match words with the query, ascending.
// Shard ordinals follow ascending doc id, so the order is also by id.
std::vector<std::size_t> level0_ordinals(const quantize::VisualWordSet& words,
                                         const index::Shard& shard, std::size_t m_match);
std::vector<std::uint64_t> level0_match(const quantize::VisualWordSet& words,
                                        const index::Shard& shard, std::size_t m_match);

struct Level1Result {
  std::vector<Candidate> kept;  // ascending by (distance, id)
  std::size_t skipped_missing_code = 0;
};

Level1Result level1_rank(std::span<const std::size_t> ordinals,
                         const quantize::DistanceTable& table, const index::Shard& shard,
                         std::string_view family, std::size_t keep);

// Keeps the global top `keep` of several ascending lists.
std::vector<Candidate> merge_candidates(std::span<const ShardResponse> responses,
                                        std::size_t keep);

}  // namespace viscade::retrieve

#endif  // VISCADE_RETRIEVE_CASCADE_H_
