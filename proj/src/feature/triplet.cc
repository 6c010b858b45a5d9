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

#include "viscade/feature/triplet.h"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <random>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::feature {
namespace {

struct Forward {
  std::vector<double> u;  // projection * x
  std::vector<double> f;  // normalized
  double norm = 0.0;
};

Forward forward(const Matrix& p, std::span<const float> x) {
  Forward out;
  out.u.assign(p.rows, 0.0);
  for (std::size_t i = 0; i < p.rows; ++i) {
    const auto row = p.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) acc += double(row[j]) * x[j];
    out.u[i] = acc;
  }
  double sq = 0.0;
  for (double v : out.u) sq += v * v;
  out.norm = std::sqrt(sq);
  out.f.assign(p.rows, 0.0);
  if (!std::isfinite(out.norm)) {
    out.f.assign(p.rows, std::numeric_limits<double>::quiet_NaN());
  } else if (out.norm > 0.0) {
    for (std::size_t i = 0; i < p.rows; ++i) out.f[i] = out.u[i] / out.norm;
  }
  return out;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

// Adds (d loss / d f) pulled back through the normalization into grad.
void backprop(const Forward& fw, const std::vector<double>& g,
              std::span<const float> x, std::vector<double>& grad, std::size_t d) {
  if (!(fw.norm > 0.0) || !std::isfinite(fw.norm)) return;
  double fg = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) fg += fw.f[i] * g[i];
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double du = (g[i] - fw.f[i] * fg) / fw.norm;
    if (du == 0.0) continue;
    double* row = grad.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) row[j] += du * x[j];
  }
}

void check_triplet(const Triplet& t, std::size_t d) {
  check_dim(t.query.size(), d, "triplet query");
  check_dim(t.positive.size(), d, "triplet positive");
  check_dim(t.negative.size(), d, "triplet negative");
}

TripletLoss evaluate(const Matrix& p, float margin, std::span<const Triplet> batch,
                     bool want_gradient) {
  const std::size_t m = p.rows;
  const std::size_t d = p.cols;
  TripletLoss out;
  std::vector<double> grad(want_gradient ? m * d : 0, 0.0);
  std::vector<double> ga(m), gp(m), gn(m);
  for (const Triplet& t : batch) {
    check_triplet(t, d);
    const Forward fa = forward(p, t.query);
    const Forward fp = forward(p, t.positive);
    const Forward fn = forward(p, t.negative);
    const double arg = sq_dist(fa.f, fp.f) - sq_dist(fa.f, fn.f) + margin;
    if (std::isnan(arg)) {
      out.loss = arg;
      continue;
    }
    if (arg <= 0.0) continue;
    out.loss += arg;
    if (!want_gradient) continue;
    for (std::size_t i = 0; i < m; ++i) {
      ga[i] = 2.0 * (fn.f[i] - fp.f[i]);
      gp[i] = -2.0 * (fa.f[i] - fp.f[i]);
      gn[i] = 2.0 * (fa.f[i] - fn.f[i]);
    }
    backprop(fa, ga, t.query, grad, d);
    backprop(fp, gp, t.positive, grad, d);
    backprop(fn, gn, t.negative, grad, d);
  }
  if (want_gradient) {
    out.gradient = Matrix(m, d);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      out.gradient.data[k] = static_cast<float>(grad[k]);
    }
  }
  return out;
}

}  // namespace

std::vector<float> triplet_embed(const TripletEmbeddingModel& model,
                                 std::span<const float> x) {
  check_dim(x.size(), model.input_dim(), "triplet embedding input");
  const Forward fw = forward(model.projection, x);
  return {fw.f.begin(), fw.f.end()};
}

Matrix triplet_embed_batch(const TripletEmbeddingModel& model, const Matrix& xs) {
  Matrix out(xs.rows, model.output_dim());
  for (std::size_t i = 0; i < xs.rows; ++i) {
    const auto y = triplet_embed(model, xs.row(i));
    std::copy(y.begin(), y.end(), out.row(i).begin());
  }
  return out;
}

TripletLoss triplet_loss(const TripletEmbeddingModel& model,
                         std::span<const Triplet> batch) {
  require(!batch.empty(), ErrorCode::kConfig, "triplet batch is empty");
  return evaluate(model.projection, model.margin, batch, true);
}

TripletTrainResult triplet_train(std::span<const Triplet> triplets,
                                 std::size_t output_dim,
                                 const TripletTrainConfig& config) {
  require(!triplets.empty(), ErrorCode::kConfig, "triplet training needs >= 1 triplet");
  require(output_dim >= 1, ErrorCode::kConfig, "triplet output dim must be >= 1");
  require(config.margin >= 0.0f, ErrorCode::kConfig, "triplet margin must be >= 0");
  require(config.learning_rate > 0.0, ErrorCode::kConfig,
          "triplet learning rate must be > 0");
  const std::size_t d = triplets.front().query.size();
  require(d >= 1, ErrorCode::kConfig, "triplet vectors are empty");

  TripletTrainResult result;
  result.model.margin = config.margin;
  result.model.projection = Matrix(output_dim, d);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(d)));
  for (float& v : result.model.projection.data) v = static_cast<float>(normal(rng));

  const double inv_n = 1.0 / static_cast<double>(triplets.size());
  auto check_finite = [&](double loss, std::size_t epoch) {
    if (!std::isfinite(loss)) {
      throw_error(ErrorCode::kDivergence,
                  "triplet loss became non-finite at epoch " + std::to_string(epoch) +
                      "; retry with a smaller learning_rate (currently " +
                      std::to_string(config.learning_rate) + ")");
    }
  };

  Matrix& p = result.model.projection;
  TripletLoss current = evaluate(p, config.margin, triplets, true);
  check_finite(current.loss, 0);
  result.loss_history.push_back(current.loss);
  double lr = config.learning_rate;
  constexpr int kMaxHalvings = 30;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (current.loss == 0.0) {
      result.loss_history.push_back(0.0);
      continue;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxHalvings && !accepted; ++attempt) {
      Matrix candidate = p;
      for (std::size_t k = 0; k < candidate.data.size(); ++k) {
        candidate.data[k] -=
            static_cast<float>(lr * inv_n * current.gradient.data[k]);
      }
      TripletLoss next = evaluate(candidate, config.margin, triplets, true);
      check_finite(next.loss, epoch);
      if (next.loss <= current.loss) {
        p = std::move(candidate);
        current = std::move(next);
        accepted = true;
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) spdlog::debug("triplet epoch {}: no descent step found", epoch);
    result.loss_history.push_back(current.loss);
  }
  return result;
}

std::vector<std::uint8_t> TripletEmbeddingModel::serialize() const {
  ByteWriter w;
  w.put_magic("TRP1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(output_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(input_dim()));
  w.put<float>(margin);
  w.put_array<float>(projection.data);
  return w.release();
}

TripletEmbeddingModel TripletEmbeddingModel::deserialize(
    std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kLoad, "triplet model");
  r.expect_magic("TRP1");
  const std::size_t m = r.get<std::uint32_t>();
  const std::size_t d = r.get<std::uint32_t>();
  if (m == 0 || d == 0) r.fail("invalid dimensions");
  TripletEmbeddingModel model;
  model.margin = r.get<float>();
  model.projection = Matrix(m, d);
  r.get_array<float>(model.projection.data);
  if (!r.at_end()) r.fail("trailing bytes");
  return model;
}

void TripletEmbeddingModel::save(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

TripletEmbeddingModel TripletEmbeddingModel::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

}  // namespace viscade::feature
