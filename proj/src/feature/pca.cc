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

#include "viscade/feature/pca.h"

#include <Eigen/Dense>

#include <cmath>

#include "viscade/core/binary_io.h"
#include "viscade/core/error.h"

namespace viscade::feature {

PCAModel pca_train(const Matrix& vectors, std::size_t target_dim) {
  const std::size_t n = vectors.rows;
  const std::size_t d = vectors.cols;
  require(target_dim >= 1, ErrorCode::kConfig, "PCA target dim must be >= 1");
  require(target_dim <= d, ErrorCode::kConfig,
          "PCA target dim " + std::to_string(target_dim) + " exceeds input dim " +
              std::to_string(d));
  require(d <= kMaxPcaInputDim, ErrorCode::kConfig,
          "PCA input dim " + std::to_string(d) + " exceeds cap " +
              std::to_string(kMaxPcaInputDim));
  require(n >= target_dim + 1, ErrorCode::kConfig,
          "PCA needs at least " + std::to_string(target_dim + 1) + " samples, got " +
              std::to_string(n));

  using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      x(vectors.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  MatD centered = x.cast<double>();
  const Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::kDegenerateTraining,
          "PCA eigendecomposition did not converge");

  PCAModel model;
  model.mean.resize(d);
  for (std::size_t j = 0; j < d; ++j) model.mean[j] = static_cast<float>(mean(j));
  model.components = Matrix(target_dim, d);
  model.eigenvalues.resize(target_dim);
  // Eigen returns ascending eigenvalues.
  for (std::size_t r = 0; r < target_dim; ++r) {
    const auto col = static_cast<Eigen::Index>(d - 1 - r);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t j = 0; j < d; ++j) {
      model.components(r, j) = static_cast<float>(v(static_cast<Eigen::Index>(j)));
    }
    model.eigenvalues[r] = std::max(0.0, solver.eigenvalues()(col));
  }
  return model;
}

std::vector<float> pca_apply(const PCAModel& model, std::span<const float> vector) {
  check_dim(vector.size(), model.input_dim(), "pca_apply input");
  const std::size_t d = model.input_dim();
  std::vector<double> centered(d);
  for (std::size_t j = 0; j < d; ++j) centered[j] = double(vector[j]) - model.mean[j];
  std::vector<float> out(model.output_dim());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto row = model.components.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * centered[j];
    out[r] = static_cast<float>(acc);
  }
  return out;
}

Matrix pca_apply_batch(const PCAModel& model, const Matrix& vectors) {
  if (vectors.rows > 0) check_dim(vectors.cols, model.input_dim(), "pca_apply_batch input");
  Matrix out(vectors.rows, model.output_dim());
  for (std::size_t i = 0; i < vectors.rows; ++i) {
    const auto y = pca_apply(model, vectors.row(i));
    std::copy(y.begin(), y.end(), out.row(i).begin());
  }
  return out;
}

std::vector<float> pca_inverse(const PCAModel& model, std::span<const float> reduced) {
  check_dim(reduced.size(), model.output_dim(), "pca_inverse input");
  const std::size_t d = model.input_dim();
  std::vector<double> acc(model.mean.begin(), model.mean.end());
  for (std::size_t r = 0; r < reduced.size(); ++r) {
    const auto row = model.components.row(r);
    for (std::size_t j = 0; j < d; ++j) acc[j] += double(reduced[r]) * row[j];
  }
  return {acc.begin(), acc.end()};
}

std::vector<std::uint8_t> PCAModel::serialize() const {
  ByteWriter w;
  w.put_magic("PCA1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(input_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(output_dim()));
  w.put_array<float>(mean);
  w.put_array<float>(components.data);
  w.put_array<double>(eigenvalues);
  return w.release();
}

PCAModel PCAModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kLoad, "PCA model");
  r.expect_magic("PCA1");
  const std::size_t d = r.get<std::uint32_t>();
  const std::size_t rank = r.get<std::uint32_t>();
  if (d == 0 || rank == 0 || rank > d) r.fail("invalid dimensions");
  PCAModel m;
  m.mean.resize(d);
  m.components = Matrix(rank, d);
  m.eigenvalues.resize(rank);
  r.get_array<float>(m.mean);
  r.get_array<float>(m.components.data);
  r.get_array<double>(m.eigenvalues);
  if (!r.at_end()) r.fail("trailing bytes");
  return m;
}

void PCAModel::save(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

PCAModel PCAModel::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

}  // namespace viscade::feature
