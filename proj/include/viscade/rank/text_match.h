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

#ifndef VISCADE_RANK_TEXT_MATCH_H_
#define VISCADE_RANK_TEXT_MATCH_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace viscade::rank {

// ASCII letters are lower-cased; tokens are maximal runs of alphanumerics and
// non-ASCII bytes.
std::vector<std::string> tokenize(std::string_view text);

// Document frequencies over a metadata corpus.
class TextStats {
 public:
  void add_document(std::string_view text);

  std::size_t documents() const { return documents_; }
  std::uint32_t df(std::string_view term) const;
  // ln(1 + D / max(df, 1)).
  double idf(std::string_view term) const;

  // Sum of idf^2 over the distinct terms shared by both texts.
  double score(std::string_view query, std::string_view candidate) const;

  // "VTXT", u64 documents, u64 terms, then (string term, u32 df) sorted by term.
  std::vector<std::uint8_t> serialize() const;
  static TextStats deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const TextStats&, const TextStats&) = default;

 private:
  std::size_t documents_ = 0;
  std::unordered_map<std::string, std::uint32_t> df_;
};

}  // namespace viscade::rank

#endif  // VISCADE_RANK_TEXT_MATCH_H_
