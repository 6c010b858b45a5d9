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

#include "viscade/retrieve/dedup.h"

#include <bit>
#include <map>
#include <numeric>

namespace viscade::retrieve {
namespace {

struct UnionFind {
  std::vector<std::size_t> parent;

  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  // The smaller index stays root, so roots are first members.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

std::vector<std::size_t> duplicate_groups(std::span<const DedupKey> keys, int threshold) {
  const std::size_t n = keys.size();
  UnionFind uf(n);
  std::map<Digest128, std::size_t> first_with_digest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keys[i].digest) continue;
    auto [it, inserted] = first_with_digest.emplace(*keys[i].digest, i);
    if (!inserted) uf.unite(it->second, i);
  }
  if (threshold >= 0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!keys[i].phash) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (keys[j].phash && std::popcount(*keys[i].phash ^ *keys[j].phash) <= threshold) {
          uf.unite(i, j);
        }
      }
    }
  }
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = uf.find(i);
  return group;
}

std::vector<std::size_t> dedup_survivors(std::span<const DedupKey> keys, int threshold) {
  const auto group = duplicate_groups(keys, threshold);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i] == i) out.push_back(i);
  }
  return out;
}

}  // namespace viscade::retrieve
