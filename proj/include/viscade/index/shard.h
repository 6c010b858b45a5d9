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

#ifndef VISCADE_INDEX_SHARD_H_
#define VISCADE_INDEX_SHARD_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viscade/index/doc.h"
#include "viscade/quantize/visual_words.h"

namespace viscade::index {

inline constexpr std::uint32_t kShardFormatVersion = 1;

struct PostingList {
  quantize::WordId word = 0;
  std::vector<std::uint64_t> doc_ids;  // strictly ascending
};

// PQ codes for one family, indexed by shard-local ordinal.
struct CodeStore {
  std::size_t bytes_per_code = 0;
  std::vector<std::uint8_t> present;
  std::vector<std::uint8_t> codes;

  const std::uint8_t* code(std::size_t ordinal) const {
    return present[ordinal] ? codes.data() + ordinal * bytes_per_code : nullptr;
  }
};

// Raw vectors for one family, indexed by shard-local ordinal.
struct FeatureStore {
  std::size_t dim = 0;
  std::vector<std::uint8_t> present;
  std::vector<float> values;

  const float* vector(std::size_t ordinal) const {
    return present[ordinal] ? values.data() + ordinal * dim : nullptr;
  }
};

// One partition of the index. Documents are stored in ascending id order;
// a document's position in that order is its ordinal.
class Shard {
 public:
  Shard() = default;

  std::uint32_t id() const { return id_; }
  std::size_t doc_count() const { return doc_ids_.size(); }
  std::size_t posting_count() const { return posting_entries_; }
  const std::vector<std::uint64_t>& doc_ids() const { return doc_ids_; }
  std::optional<std::size_t> ordinal_of(std::uint64_t image_id) const;

  // Number of distinct words with a posting list.
  std::size_t word_count() const { return words_.size(); }
  const std::vector<quantize::WordId>& words() const { return words_; }

  // Calls fn(ordinal) for each entry of the word's list in ascending order.
  // Throws kIntegrity when the encoded list is malformed.
  template <typename Fn>
  void for_each_posting(quantize::WordId word, Fn&& fn) const;
  PostingList postings(quantize::WordId word) const;

  const CodeStore* codes(std::string_view family) const;
  const FeatureStore* features(std::string_view family) const;
  DocMeta meta(std::size_t ordinal) const;

  // File name suffix -> encoded bytes, e.g. "postings", "codes.<family>".
  std::map<std::string, std::vector<std::uint8_t>> serialize() const;
  static Shard deserialize(std::uint32_t shard_id,
                           const std::map<std::string, std::vector<std::uint8_t>>& files);
  static std::vector<std::string> file_suffixes(std::span<const std::string> code_families,
                                                std::span<const std::string> raw_families);

  friend class ShardBuilder;

 private:
  [[noreturn]] void corrupt(const std::string& what) const;

  std::uint32_t id_ = 0;
  std::vector<std::uint64_t> doc_ids_;
  std::vector<quantize::WordId> words_;
  std::vector<std::uint64_t> posting_offsets_;  // words_.size() + 1 entries
  std::vector<std::uint32_t> posting_lengths_;
  std::vector<std::uint8_t> posting_blob_;
  std::size_t posting_entries_ = 0;
  std::map<std::string, CodeStore, std::less<>> codes_;
  std::map<std::string, FeatureStore, std::less<>> features_;
  std::vector<std::uint64_t> meta_offsets_;  // doc_count + 1 entries
  std::vector<std::uint8_t> meta_blob_;
};

// Accumulates documents for one shard; finish() sorts by id and encodes.
class ShardBuilder {
 public:
  ShardBuilder(std::uint32_t shard_id, std::vector<std::string> code_families,
               std::vector<std::size_t> code_bytes, std::vector<std::string> raw_families,
               std::vector<std::size_t> raw_dims);

  struct Entry {
    DocMeta meta;
    std::optional<quantize::VisualWordSet> words;
    std::vector<std::optional<std::vector<std::uint8_t>>> codes;  // per code family
    std::vector<const std::vector<float>*> raw;                   // per raw family
  };

  void add(Entry entry) { entries_.push_back(std::move(entry)); }
  Shard finish();

 private:
  std::uint32_t shard_id_;
  std::vector<std::string> code_families_;
  std::vector<std::size_t> code_bytes_;
  std::vector<std::string> raw_families_;
  std::vector<std::size_t> raw_dims_;
  std::vector<Entry> entries_;
};

template <typename Fn>
void Shard::for_each_posting(quantize::WordId word, Fn&& fn) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), word);
  if (it == words_.end() || *it != word) return;
  const std::size_t w = static_cast<std::size_t>(it - words_.begin());
  const std::uint8_t* p = posting_blob_.data() + posting_offsets_[w];
  const std::uint8_t* end = posting_blob_.data() + posting_offsets_[w + 1];
  std::uint64_t ordinal = 0;
  const std::size_t n = doc_ids_.size();
  for (std::uint32_t i = 0; i < posting_lengths_[w]; ++i) {
    std::uint64_t delta = 0;
    int shift = 0;
    while (true) {
      if (p == end || shift > 63) corrupt("posting list for word " + std::to_string(word));
      const std::uint8_t b = *p++;
      delta |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if ((b & 0x80) == 0) break;
      shift += 7;
    }
    if (i > 0 && delta == 0) corrupt("non-ascending posting list");
    ordinal += delta;
    if (ordinal >= n) corrupt("posting ordinal out of range");
    fn(static_cast<std::size_t>(ordinal));
  }
  if (p != end) corrupt("posting list has trailing bytes");
}

}  // namespace viscade::index

#endif  // VISCADE_INDEX_SHARD_H_
