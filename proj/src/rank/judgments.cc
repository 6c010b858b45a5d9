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

#include "viscade/rank/judgments.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::rank {
namespace {

std::vector<int> label_components(const ComparisonCounts& c, std::size_t& count) {
  const std::size_t n = c.n;
  std::vector<int> comp(n, -1);
  count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> stack = {s};
    comp[s] = static_cast<int>(count);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j) {
        if (comp[j] >= 0) continue;
        if (c.wins[i * n + j] + c.wins[j * n + i] + c.ties[i * n + j] > 0.0) {
          comp[j] = static_cast<int>(count);
          stack.push_back(j);
        }
      }
    }
    ++count;
  }
  return comp;
}

}  // namespace

BradleyTerryFit bradley_terry(const ComparisonCounts& counts, double prior,
                              double tolerance, std::size_t max_iters) {
  const std::size_t n = counts.n;
  require(counts.wins.size() == n * n && counts.ties.size() == n * n, ErrorCode::kConfig,
          "comparison matrices must be n x n");
  BradleyTerryFit fit;
  fit.component = label_components(counts, fit.components);
  if (fit.components > 1) {
    spdlog::warn("comparison graph has {} disconnected components; strengths are "
                 "fit per component and are not comparable across them",
                 fit.components);
  }

  // w[i][j]: effective wins of i over j.
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool compared = counts.wins[i * n + j] + counts.wins[j * n + i] +
                                counts.ties[i * n + j] > 0.0;
      if (!compared) continue;
      w[i * n + j] = counts.wins[i * n + j] + 0.5 * counts.ties[i * n + j] + prior;
    }
  }
  std::vector<double> total_wins(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) total_wins[i] += w[i * n + j];
  }

  std::vector<double> p(n, 1.0), next(n);
  for (fit.iterations = 0; fit.iterations < max_iters; ++fit.iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double games = w[i * n + j] + w[j * n + i];
        if (games > 0.0) denom += games / (p[i] + p[j]);
      }
      next[i] = denom > 0.0 ? total_wins[i] / denom : 1.0;
    }
    // Rescale each component to geometric mean 1.
    std::vector<double> log_sum(fit.components, 0.0);
    std::vector<std::size_t> size(fit.components, 0);
    for (std::size_t i = 0; i < n; ++i) {
      log_sum[fit.component[i]] += std::log(next[i]);
      ++size[fit.component[i]];
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = fit.component[i];
      next[i] = std::exp(std::log(next[i]) - log_sum[c] / static_cast<double>(size[c]));
      change = std::max(change, std::abs(std::log(next[i]) - std::log(p[i])));
    }
    p.swap(next);
    if (change <= tolerance) break;
  }
  fit.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.theta[i] = std::log(p[i]);
  return fit;
}

std::vector<int> strengths_to_grades(std::span<const double> theta) {
  const std::size_t n = theta.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return theta[a] < theta[b]; });
  constexpr double kTieTolerance = 1e-9;
  std::vector<int> grades(n, 0);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && theta[order[end]] - theta[order[start]] <= kTieTolerance) ++end;
    const double mid_rank = 0.5 * static_cast<double>(start + end - 1);
    const int grade = std::min(
        kMaxGrade, static_cast<int>(std::floor((kMaxGrade + 1) * (mid_rank + 0.5) /
                                               static_cast<double>(n))));
    for (std::size_t k = start; k < end; ++k) grades[order[k]] = grade;
    start = end;
  }
  return grades;
}

std::vector<ListwiseLabel> pairwise_to_listwise(std::span<const PairwiseJudgment> judgments) {
  std::map<std::string, std::vector<PairwiseJudgment>> by_query;
  for (const auto& j : judgments) {
    require(j.winner != j.loser, ErrorCode::kMalformedRequest,
            "judgment for query " + j.query_id + " compares doc " +
                std::to_string(j.winner) + " with itself");
    by_query[j.query_id].push_back(j);
  }
  std::vector<ListwiseLabel> labels;
  for (auto& [query, list] : by_query) {
    std::sort(list.begin(), list.end());
    std::vector<std::uint64_t> docs;
    for (const auto& j : list) {
      docs.push_back(j.winner);
      docs.push_back(j.loser);
    }
    std::sort(docs.begin(), docs.end());
    docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
    auto index_of = [&](std::uint64_t id) {
      return static_cast<std::size_t>(std::lower_bound(docs.begin(), docs.end(), id) -
                                      docs.begin());
    };
    ComparisonCounts counts(docs.size());
    const std::size_t n = docs.size();
    for (const auto& j : list) {
      const std::size_t a = index_of(j.winner), b = index_of(j.loser);
      if (j.tie) {
        counts.ties[a * n + b] += 1.0;
        counts.ties[b * n + a] += 1.0;
      } else {
        counts.wins[a * n + b] += 1.0;
      }
    }
    const auto fit = bradley_terry(counts);
    if (fit.components > 1) spdlog::warn("query {}: judgments are disconnected", query);
    const auto grades = strengths_to_grades(fit.theta);
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back({query, docs[i], grades[i], fit.theta[i]});
    }
  }
  return labels;
}

namespace {

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  const std::string text = read_file_text(path);
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorCode::kLoad, path.string() + ":" + std::to_string(number) + ": " +
                                        e.what());
    }
  }
}

std::string query_id_of(const nlohmann::json& j) {
  const auto& q = j.at("query_id");
  return q.is_string() ? q.get<std::string>() : q.dump();
}

template <typename T>
void write_lines(const std::filesystem::path& path, std::span<const T> items,
                 nlohmann::json (*to)(const T&)) {
  std::string out;
  for (const auto& item : items) {
    out += to(item).dump();
    out += '\n';
  }
  write_file_text(path, out);
}

nlohmann::json judgment_json(const PairwiseJudgment& j) {
  return {{"query_id", j.query_id}, {"winner", j.winner}, {"loser", j.loser}, {"tie", j.tie}};
}

nlohmann::json label_json(const ListwiseLabel& l) {
  return {{"query_id", l.query_id},
          {"doc_id", l.doc_id},
          {"grade", l.grade},
          {"strength", l.strength}};
}

}  // namespace

std::vector<PairwiseJudgment> load_judgments(const std::filesystem::path& path) {
  std::vector<PairwiseJudgment> out;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    out.push_back({query_id_of(j), j.at("winner").get<std::uint64_t>(),
                   j.at("loser").get<std::uint64_t>(), j.value("tie", false)});
  });
  return out;
}

void save_judgments(const std::filesystem::path& path,
                    std::span<const PairwiseJudgment> judgments) {
  write_lines(path, judgments, &judgment_json);
}

std::vector<ListwiseLabel> load_labels(const std::filesystem::path& path) {
  std::vector<ListwiseLabel> out;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    const int grade = j.at("grade").get<int>();
    require(grade >= 0 && grade <= kMaxGrade, ErrorCode::kLoad,
            path.string() + ": grade " + std::to_string(grade) + " out of range");
    out.push_back({query_id_of(j), j.at("doc_id").get<std::uint64_t>(), grade,
                   j.value("strength", 0.0)});
  });
  return out;
}

void save_labels(const std::filesystem::path& path, std::span<const ListwiseLabel> labels) {
  write_lines(path, labels, &label_json);
}

}  // namespace viscade::rank
