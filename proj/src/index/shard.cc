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

#include "viscade/index/shard.h"

#include <algorithm>
#include <numeric>

#include "viscade/core/binary_io.h"
#include "viscade/core/digest.h"
#include "viscade/core/error.h"

namespace viscade::index {
namespace {

constexpr std::uint8_t kHasCategory = 1;
constexpr std::uint8_t kHasPhash = 2;
constexpr std::uint8_t kHasDigest = 4;
constexpr std::uint8_t kHasColor = 8;

void begin_file(ByteWriter& w, std::string_view magic, std::uint32_t shard_id) {
  w.put_magic(magic);
  w.put<std::uint32_t>(kShardFormatVersion);
  w.put<std::uint32_t>(shard_id);
}

std::vector<std::uint8_t> end_file(ByteWriter& w) {
  const std::uint64_t sum = fnv1a64(std::span<const std::uint8_t>(w.bytes()));
  w.put<std::uint64_t>(sum);
  return w.release();
}

// Verifies the trailing checksum and header, returning a reader positioned at
// the payload.
ByteReader open_file(const std::vector<std::uint8_t>& bytes, std::string_view magic,
                     std::uint32_t shard_id, const std::string& name) {
  const std::string context = "shard " + std::to_string(shard_id) + " file " + name;
  if (bytes.size() < 4 + 4 + 4 + 8) {
    throw_error(ErrorCode::kIntegrity, context + ": truncated (" +
                                           std::to_string(bytes.size()) + " bytes)");
  }
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (fnv1a64(body) != stored) {
    throw_error(ErrorCode::kIntegrity, context + ": checksum mismatch (truncated or corrupt)");
  }
  ByteReader r(body, ErrorCode::kIntegrity, context);
  r.expect_magic(magic);
  const auto version = r.get<std::uint32_t>();
  if (version != kShardFormatVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  if (r.get<std::uint32_t>() != shard_id) r.fail("belongs to a different shard");
  return r;
}

void put_meta(ByteWriter& w, const DocMeta& m) {
  w.put<std::uint64_t>(m.image_id);
  w.put_string(m.source_uri);
  w.put_string(m.metadata_text);
  std::uint8_t flags = 0;
  if (m.category) flags |= kHasCategory;
  if (m.phash) flags |= kHasPhash;
  if (m.digest) flags |= kHasDigest;
  if (m.dominant_color) flags |= kHasColor;
  w.put<std::uint8_t>(flags);
  if (m.category) w.put_string(*m.category);
  if (m.phash) w.put<std::uint64_t>(*m.phash);
  if (m.digest) w.put_array<std::uint8_t>(m.digest->bytes);
  if (m.dominant_color) {
    w.put_array<float>(m.dominant_color->rgb);
    w.put<float>(m.dominant_color->weight);
  }
}

}  // namespace

std::uint32_t shard_assign(std::uint64_t image_id, std::uint32_t k) {
  require(k >= 1, ErrorCode::kConfig, "shard count must be >= 1");
  return static_cast<std::uint32_t>(fnv1a64_u64(image_id) % k);
}

void Shard::corrupt(const std::string& what) const {
  throw_error(ErrorCode::kIntegrity, "shard " + std::to_string(id_) + ": " + what);
}

std::optional<std::size_t> Shard::ordinal_of(std::uint64_t image_id) const {
  auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), image_id);
  if (it == doc_ids_.end() || *it != image_id) return std::nullopt;
  return static_cast<std::size_t>(it - doc_ids_.begin());
}

PostingList Shard::postings(quantize::WordId word) const {
  PostingList list{word, {}};
  for_each_posting(word, [&](std::size_t ord) { list.doc_ids.push_back(doc_ids_[ord]); });
  return list;
}

const CodeStore* Shard::codes(std::string_view family) const {
  auto it = codes_.find(family);
  return it == codes_.end() ? nullptr : &it->second;
}

const FeatureStore* Shard::features(std::string_view family) const {
  auto it = features_.find(family);
  return it == features_.end() ? nullptr : &it->second;
}

DocMeta Shard::meta(std::size_t ordinal) const {
  require(ordinal < doc_ids_.size(), ErrorCode::kNotFound,
          "ordinal " + std::to_string(ordinal) + " outside shard " + std::to_string(id_));
  const std::span<const std::uint8_t> rec(meta_blob_.data() + meta_offsets_[ordinal],
                                          meta_offsets_[ordinal + 1] - meta_offsets_[ordinal]);
  ByteReader r(rec, ErrorCode::kIntegrity,
               "shard " + std::to_string(id_) + " meta record " + std::to_string(ordinal));
  DocMeta m;
  m.image_id = r.get<std::uint64_t>();
  m.source_uri = r.get_string();
  m.metadata_text = r.get_string();
  const auto flags = r.get<std::uint8_t>();
  if (flags & kHasCategory) m.category = r.get_string();
  if (flags & kHasPhash) m.phash = r.get<std::uint64_t>();
  if (flags & kHasDigest) {
    Digest128 d;
    r.get_array<std::uint8_t>(d.bytes);
    m.digest = d;
  }
  if (flags & kHasColor) {
    feature::DominantColor c;
    r.get_array<float>(c.rgb);
    c.weight = r.get<float>();
    m.dominant_color = c;
  }
  if (!r.at_end()) r.fail("trailing bytes");
  if (m.image_id != doc_ids_[ordinal]) r.fail("id does not match the id table");
  return m;
}

std::vector<std::string> Shard::file_suffixes(std::span<const std::string> code_families,
                                              std::span<const std::string> raw_families) {
  std::vector<std::string> out = {"postings", "meta"};
  for (const auto& f : code_families) out.push_back("codes." + f);
  for (const auto& f : raw_families) out.push_back("feat." + f);
  return out;
}

std::map<std::string, std::vector<std::uint8_t>> Shard::serialize() const {
  std::map<std::string, std::vector<std::uint8_t>> files;
  {
    ByteWriter w;
    begin_file(w, "VPST", id_);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(words_.size()));
    w.put_array<std::uint32_t>(words_);
    w.put_array<std::uint32_t>(posting_lengths_);
    w.put_array<std::uint64_t>(posting_offsets_);
    w.put<std::uint64_t>(posting_blob_.size());
    w.put_array<std::uint8_t>(posting_blob_);
    files["postings"] = end_file(w);
  }
  {
    ByteWriter w;
    begin_file(w, "VMET", id_);
    w.put<std::uint64_t>(doc_ids_.size());
    w.put_array<std::uint64_t>(doc_ids_);
    w.put_array<std::uint64_t>(meta_offsets_);
    w.put<std::uint64_t>(meta_blob_.size());
    w.put_array<std::uint8_t>(meta_blob_);
    files["meta"] = end_file(w);
  }
  for (const auto& [family, store] : codes_) {
    ByteWriter w;
    begin_file(w, "VPQC", id_);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(store.bytes_per_code));
    w.put<std::uint64_t>(store.present.size());
    w.put_array<std::uint8_t>(store.present);
    w.put_array<std::uint8_t>(store.codes);
    files["codes." + family] = end_file(w);
  }
  for (const auto& [family, store] : features_) {
    ByteWriter w;
    begin_file(w, "VFEA", id_);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(store.dim));
    w.put<std::uint64_t>(store.present.size());
    w.put_array<std::uint8_t>(store.present);
    w.put_array<float>(store.values);
    files["feat." + family] = end_file(w);
  }
  return files;
}

Shard Shard::deserialize(std::uint32_t shard_id,
                         const std::map<std::string, std::vector<std::uint8_t>>& files) {
  Shard s;
  s.id_ = shard_id;
  auto require_file = [&](const std::string& name) -> const std::vector<std::uint8_t>& {
    auto it = files.find(name);
    if (it == files.end()) s.corrupt("missing file " + name);
    return it->second;
  };

  {
    ByteReader r = open_file(require_file("meta"), "VMET", shard_id, "meta");
    const auto count = r.get<std::uint64_t>();
    if (count > r.remaining() / 8) r.fail("doc count exceeds file size");
    s.doc_ids_.resize(count);
    r.get_array<std::uint64_t>(s.doc_ids_);
    s.meta_offsets_.resize(count + 1);
    r.get_array<std::uint64_t>(s.meta_offsets_);
    const auto blob = r.get<std::uint64_t>();
    if (blob != r.remaining()) r.fail("metadata blob size mismatch");
    s.meta_blob_.resize(blob);
    r.get_array<std::uint8_t>(s.meta_blob_);
    if (s.meta_offsets_.front() != 0 || s.meta_offsets_.back() != blob) {
      r.fail("metadata offsets do not cover the blob");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (s.meta_offsets_[i] > s.meta_offsets_[i + 1]) r.fail("metadata offsets decrease");
      if (i > 0 && s.doc_ids_[i] <= s.doc_ids_[i - 1]) r.fail("doc ids not ascending");
    }
  }
  const std::size_t n = s.doc_ids_.size();

  {
    ByteReader r = open_file(require_file("postings"), "VPST", shard_id, "postings");
    const auto words = r.get<std::uint32_t>();
    if (words > r.remaining() / 16) r.fail("word count exceeds file size");
    s.words_.resize(words);
    s.posting_lengths_.resize(words);
    s.posting_offsets_.resize(words + 1);
    r.get_array<std::uint32_t>(s.words_);
    r.get_array<std::uint32_t>(s.posting_lengths_);
    r.get_array<std::uint64_t>(s.posting_offsets_);
    const auto blob = r.get<std::uint64_t>();
    if (blob != r.remaining()) r.fail("posting blob size mismatch");
    s.posting_blob_.resize(blob);
    r.get_array<std::uint8_t>(s.posting_blob_);
    if (s.posting_offsets_.front() != 0 || s.posting_offsets_.back() != blob) {
      r.fail("posting offsets do not cover the blob");
    }
    for (std::size_t i = 0; i < words; ++i) {
      if (s.posting_offsets_[i] > s.posting_offsets_[i + 1]) r.fail("posting offsets decrease");
      if (i > 0 && s.words_[i] <= s.words_[i - 1]) r.fail("words not ascending");
      if (s.posting_lengths_[i] > n) r.fail("posting list longer than the shard");
      s.posting_entries_ += s.posting_lengths_[i];
    }
  }

  for (const auto& [name, bytes] : files) {
    if (name.starts_with("codes.")) {
      const std::string family = name.substr(6);
      ByteReader r = open_file(bytes, "VPQC", shard_id, name);
      CodeStore store;
      store.bytes_per_code = r.get<std::uint32_t>();
      if (r.get<std::uint64_t>() != n) r.fail("record count differs from the doc count");
      if (r.remaining() != n * (1 + store.bytes_per_code)) r.fail("size mismatch");
      store.present.resize(n);
      store.codes.resize(n * store.bytes_per_code);
      r.get_array<std::uint8_t>(store.present);
      r.get_array<std::uint8_t>(store.codes);
      s.codes_.emplace(family, std::move(store));
    } else if (name.starts_with("feat.")) {
      const std::string family = name.substr(5);
      ByteReader r = open_file(bytes, "VFEA", shard_id, name);
      FeatureStore store;
      store.dim = r.get<std::uint32_t>();
      if (r.get<std::uint64_t>() != n) r.fail("record count differs from the doc count");
      if (r.remaining() != n * (1 + 4 * store.dim)) r.fail("size mismatch");
      store.present.resize(n);
      store.values.resize(n * store.dim);
      r.get_array<std::uint8_t>(store.present);
      r.get_array<float>(store.values);
      s.features_.emplace(family, std::move(store));
    }
  }
  return s;
}

ShardBuilder::ShardBuilder(std::uint32_t shard_id, std::vector<std::string> code_families,
                           std::vector<std::size_t> code_bytes,
                           std::vector<std::string> raw_families,
                           std::vector<std::size_t> raw_dims)
    : shard_id_(shard_id),
      code_families_(std::move(code_families)),
      code_bytes_(std::move(code_bytes)),
      raw_families_(std::move(raw_families)),
      raw_dims_(std::move(raw_dims)) {}

Shard ShardBuilder::finish() {
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.meta.image_id < b.meta.image_id;
  });
  Shard s;
  s.id_ = shard_id_;
  const std::size_t n = entries_.size();

  ByteWriter meta;
  s.meta_offsets_.push_back(0);
  std::map<quantize::WordId, std::vector<std::uint32_t>> lists;
  for (std::size_t i = 0; i < n; ++i) {
    const Entry& e = entries_[i];
    s.doc_ids_.push_back(e.meta.image_id);
    put_meta(meta, e.meta);
    s.meta_offsets_.push_back(meta.size());
    if (e.words) {
      for (std::size_t b = 0; b < e.words->size(); ++b) {
        lists[e.words->word(b)].push_back(static_cast<std::uint32_t>(i));
      }
    }
  }
  s.meta_blob_ = meta.release();

  ByteWriter blob;
  s.posting_offsets_.push_back(0);
  for (const auto& [word, ordinals] : lists) {
    s.words_.push_back(word);
    s.posting_lengths_.push_back(static_cast<std::uint32_t>(ordinals.size()));
    std::uint32_t prev = 0;
    for (auto ord : ordinals) {
      blob.put_varint(ord - prev);
      prev = ord;
    }
    s.posting_offsets_.push_back(blob.size());
    s.posting_entries_ += ordinals.size();
  }
  s.posting_blob_ = blob.release();

  for (std::size_t f = 0; f < code_families_.size(); ++f) {
    CodeStore store;
    store.bytes_per_code = code_bytes_[f];
    store.present.assign(n, 0);
    store.codes.assign(n * store.bytes_per_code, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& code = entries_[i].codes[f];
      if (!code) continue;
      store.present[i] = 1;
      std::copy(code->begin(), code->end(), store.codes.begin() + i * store.bytes_per_code);
    }
    s.codes_.emplace(code_families_[f], std::move(store));
  }
  for (std::size_t f = 0; f < raw_families_.size(); ++f) {
    FeatureStore store;
    store.dim = raw_dims_[f];
    store.present.assign(n, 0);
    store.values.assign(n * store.dim, 0.0f);
    for (std::size_t i = 0; i < n; ++i) {
      const auto* v = entries_[i].raw[f];
      if (v == nullptr) continue;
      store.present[i] = 1;
      std::copy(v->begin(), v->end(), store.values.begin() + i * store.dim);
    }
    s.features_.emplace(raw_families_[f], std::move(store));
  }
  entries_.clear();
  return s;
}

}  // namespace viscade::index
