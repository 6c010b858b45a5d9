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

#include "viscade/retrieve/cascade.h"

#include <algorithm>

#include "viscade/core/error.h"

namespace viscade::retrieve {

std::vector<std::size_t> level0_ordinals(const quantize::VisualWordSet& words,
                                         const index::Shard& shard, std::size_t m_match) {
  const std::size_t need = std::max<std::size_t>(m_match, 1);
  std::vector<std::size_t> out;
  if (need > words.size() || shard.doc_count() == 0) return out;
  if (need == 1 && words.size() == 1) {
    shard.for_each_posting(words.word(0), [&](std::size_t ord) { out.push_back(ord); });
    return out;
  }
  std::vector<std::uint8_t> counts(shard.doc_count(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t b = 0; b < words.size(); ++b) {
    shard.for_each_posting(words.word(b), [&](std::size_t ord) {
      if (counts[ord]++ == 0) touched.push_back(ord);
    });
  }
  for (std::size_t ord : touched) {
    if (counts[ord] >= need) out.push_back(ord);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint64_t> level0_match(const quantize::VisualWordSet& words,
                                        const index::Shard& shard, std::size_t m_match) {
  std::vector<std::uint64_t> ids;
  for (std::size_t ord : level0_ordinals(words, shard, m_match)) {
    ids.push_back(shard.doc_ids()[ord]);
  }
  return ids;
}

Level1Result level1_rank(std::span<const std::size_t> ordinals,
                         const quantize::DistanceTable& table, const index::Shard& shard,
                         std::string_view family, std::size_t keep) {
  Level1Result out;
  const index::CodeStore* store = shard.codes(family);
  if (store == nullptr) {
    out.skipped_missing_code = ordinals.size();
    return out;
  }
  require(store->bytes_per_code == table.n, ErrorCode::kDimMismatch,
          "distance table has " + std::to_string(table.n) + " subspaces, codes have " +
              std::to_string(store->bytes_per_code));
  out.kept.reserve(ordinals.size());
  for (std::size_t ord : ordinals) {
    const std::uint8_t* code = store->code(ord);
    if (code == nullptr) {
      ++out.skipped_missing_code;
      continue;
    }
    out.kept.push_back({shard.doc_ids()[ord], table.adc_unchecked(code), shard.id(), ord});
  }
  if (out.kept.size() > keep) {
    std::nth_element(out.kept.begin(), out.kept.begin() + keep, out.kept.end(), candidate_less);
    out.kept.resize(keep);
  }
  std::sort(out.kept.begin(), out.kept.end(), candidate_less);
  return out;
}

std::vector<Candidate> merge_candidates(std::span<const ShardResponse> responses,
                                        std::size_t keep) {
  std::vector<Candidate> all;
  for (const auto& r : responses) {
    if (r.complete) all.insert(all.end(), r.candidates.begin(), r.candidates.end());
  }
  if (all.size() > keep) {
    std::nth_element(all.begin(), all.begin() + keep, all.end(), candidate_less);
    all.resize(keep);
  }
  std::sort(all.begin(), all.end(), candidate_less);
  return all;
}

}  // namespace viscade::retrieve
