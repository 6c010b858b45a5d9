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

#include "viscade/rank/text_match.h"

#include <algorithm>
#include <cmath>

#include "viscade/core/binary_io.h"

namespace viscade::rank {
namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

std::vector<std::string> unique_terms(std::string_view text) {
  auto terms = tokenize(text);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32) : ch);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

void TextStats::add_document(std::string_view text) {
  ++documents_;
  for (auto& term : unique_terms(text)) ++df_[std::move(term)];
}

std::uint32_t TextStats::df(std::string_view term) const {
  auto it = df_.find(std::string(term));
  return it == df_.end() ? 0 : it->second;
}

double TextStats::idf(std::string_view term) const {
  const double d = static_cast<double>(documents_);
  return std::log(1.0 + d / std::max<double>(df(term), 1.0));
}

double TextStats::score(std::string_view query, std::string_view candidate) const {
  const auto q = unique_terms(query);
  const auto c = unique_terms(candidate);
  double total = 0.0;
  auto qi = q.begin();
  auto ci = c.begin();
  while (qi != q.end() && ci != c.end()) {
    if (*qi < *ci) {
      ++qi;
    } else if (*ci < *qi) {
      ++ci;
    } else {
      const double w = idf(*qi);
      total += w * w;
      ++qi;
      ++ci;
    }
  }
  return total;
}

std::vector<std::uint8_t> TextStats::serialize() const {
  std::vector<std::pair<std::string_view, std::uint32_t>> terms(df_.begin(), df_.end());
  std::sort(terms.begin(), terms.end());
  ByteWriter w;
  w.put_magic("VTXT");
  w.put<std::uint64_t>(documents_);
  w.put<std::uint64_t>(terms.size());
  for (const auto& [term, df] : terms) {
    w.put_string(term);
    w.put<std::uint32_t>(df);
  }
  return w.release();
}

TextStats TextStats::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kLoad, "text statistics");
  r.expect_magic("VTXT");
  TextStats s;
  s.documents_ = r.get<std::uint64_t>();
  const auto terms = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < terms; ++i) {
    std::string term = r.get_string();
    s.df_[std::move(term)] = r.get<std::uint32_t>();
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return s;
}

}  // namespace viscade::rank
