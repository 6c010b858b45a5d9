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

#include <gtest/gtest.h>

#include <filesystem>

#include "support/splitmix.h"
#include "viscade/core/error.h"

namespace viscade::feature {
namespace {

Matrix oracle_sample() {
  testing::SplitMix64 rng(7);
  Matrix x(20, 5);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      x(i, j) = static_cast<float>(rng.symmetric() * (5.0 - j));
    }
  }
  return x;
}

double mean_reconstruction_error(const PCAModel& m, const Matrix& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto back = pca_inverse(m, pca_apply(m, x.row(i)));
    total += squared_l2_f64(back, x.row(i));
  }
  return total / static_cast<double>(x.rows);
}

void expect_orthonormal(const PCAModel& m) {
  for (std::size_t a = 0; a < m.output_dim(); ++a) {
    for (std::size_t b = 0; b < m.output_dim(); ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m.input_dim(); ++j) {
        dot += double(m.components(a, j)) * m.components(b, j);
      }
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-5);
    }
  }
  for (std::size_t r = 1; r < m.eigenvalues.size(); ++r) {
    EXPECT_LE(m.eigenvalues[r], m.eigenvalues[r - 1]);
    EXPECT_GE(m.eigenvalues[r], 0.0);
  }
}

TEST(Pca, AxisAlignedVariance) {
  Matrix x;
  for (int i = 0; i < 10; ++i) x.append_row(std::vector<float>{float(i), 3.0f});
  const auto m = pca_train(x, 2);
  EXPECT_NEAR(std::abs(m.components(0, 0)), 1.0f, 1e-6);
  EXPECT_NEAR(m.components(0, 1), 0.0f, 1e-6);
  EXPECT_NEAR(m.eigenvalues[1], 0.0, 1e-9);
}

TEST(Pca, EigenvaluesMatchDenseOracle) {
  const auto m = pca_train(oracle_sample(), 5);
  const double expected[] = {10.468415551052, 4.019989289061, 1.947988881948,
                             1.222467078505, 0.175492675255};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(m.eigenvalues[i], expected[i], 1e-5);
  expect_orthonormal(m);
}

TEST(Pca, ReconstructionErrorEqualsDiscardedEigenvalues) {
  const Matrix x = oracle_sample();
  const auto m = pca_train(x, 2);
  EXPECT_NEAR(mean_reconstruction_error(m, x), 3.345948635707, 1e-5);
  const auto full = pca_train(x, 5);
  const double discarded = full.eigenvalues[2] + full.eigenvalues[3] + full.eigenvalues[4];
  EXPECT_NEAR(mean_reconstruction_error(m, x), discarded, 1e-5);
  expect_orthonormal(m);
}

TEST(Pca, FullRankPreservesDistances) {
  const Matrix x = testing::gaussian_matrix(30, 6, 3);
  const auto m = pca_train(x, 6);
  const Matrix y = pca_apply_batch(m, x);
  for (std::size_t a = 0; a < x.rows; ++a) {
    for (std::size_t b = a + 1; b < x.rows; ++b) {
      EXPECT_NEAR(std::sqrt(squared_l2_f64(x.row(a), x.row(b))),
                  std::sqrt(squared_l2_f64(y.row(a), y.row(b))), 1e-5);
    }
  }
}

TEST(Pca, MeanMapsToZeroAndEigenvectorToUnit) {
  const Matrix x = testing::gaussian_matrix(40, 4, 5);
  const auto m = pca_train(x, 3);
  for (float v : pca_apply(m, m.mean)) EXPECT_NEAR(v, 0.0f, 1e-6);
  std::vector<float> probe = m.mean;
  for (std::size_t j = 0; j < 4; ++j) probe[j] += m.components(0, j);
  const auto y = pca_apply(m, probe);
  EXPECT_NEAR(y[0], 1.0f, 1e-5);
  EXPECT_NEAR(y[1], 0.0f, 1e-5);
  EXPECT_NEAR(y[2], 0.0f, 1e-5);
}

TEST(Pca, ConfigErrors) {
  const Matrix x = testing::gaussian_matrix(3, 4, 1);
  EXPECT_THROW(
      try { pca_train(x, 5); } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kConfig);
        throw;
      },
      Error);
  EXPECT_THROW(pca_train(x, 3), Error);  // needs r+1 = 4 samples
  EXPECT_NO_THROW(pca_train(x, 2));
}

TEST(Pca, DimMismatch) {
  const auto m = pca_train(testing::gaussian_matrix(10, 4, 2), 2);
  try {
    pca_apply(m, std::vector<float>(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
}

TEST(Pca, SaveLoadRoundTrip) {
  const auto m = pca_train(testing::gaussian_matrix(25, 8, 9), 4);
  const auto path = std::filesystem::temp_directory_path() / "viscade_pca_test.bin";
  m.save(path);
  EXPECT_EQ(PCAModel::load(path), m);
  std::filesystem::remove(path);
  auto bytes = m.serialize();
  bytes.pop_back();
  EXPECT_THROW(PCAModel::deserialize(bytes), Error);
}

}  // namespace
}  // namespace viscade::feature
