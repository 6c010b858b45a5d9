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

#ifndef VISCADE_FEATURE_TRIPLET_H_
#define VISCADE_FEATURE_TRIPLET_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "viscade/core/matrix.h"

namespace viscade::feature {

struct Triplet {
  std::vector<float> query;
  std::vector<float> positive;
  std::vector<float> negative;
};

// f(x) = normalize(projection * x). A zero pre-image maps to the zero vector.
struct TripletEmbeddingModel {
  Matrix projection;  // m x d
  float margin = 0.2f;

  std::size_t output_dim() const { return projection.rows; }
  std::size_t input_dim() const { return projection.cols; }

  std::vector<std::uint8_t> serialize() const;
  static TripletEmbeddingModel deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static TripletEmbeddingModel load(const std::filesystem::path& path);

  friend bool operator==(const TripletEmbeddingModel&,
                         const TripletEmbeddingModel&) = default;
};

std::vector<float> triplet_embed(const TripletEmbeddingModel& model,
                                 std::span<const float> x);
Matrix triplet_embed_batch(const TripletEmbeddingModel& model, const Matrix& xs);

struct TripletLoss {
  double loss = 0.0;  // summed over the batch
  Matrix gradient;    // d loss / d projection, m x d
};

TripletLoss triplet_loss(const TripletEmbeddingModel& model,
                         std::span<const Triplet> batch);

struct TripletTrainConfig {
  float margin = 0.2f;
  double learning_rate = 0.5;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
};

struct TripletTrainResult {
  TripletEmbeddingModel model;
  std::vector<double> loss_history;  // [0] is the initial loss, then one per epoch
};

// Full-batch gradient descent on the mean loss. A step that raises the loss
// is rejected and the learning rate halved.
TripletTrainResult triplet_train(std::span<const Triplet> triplets,
                                 std::size_t output_dim,
                                 const TripletTrainConfig& config);

}  // namespace viscade::feature

#endif  // VISCADE_FEATURE_TRIPLET_H_
