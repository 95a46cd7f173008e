// Copyright 2026 The DREQ Authors.
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

#include "dreq/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dreq {

void TrainConfig::Validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw std::invalid_argument("adam betas must be in [0,1)");
  if (!(epsilon > 0)) throw std::invalid_argument("adam epsilon must be > 0");
}

double BceLoss(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("bce: logits and labels differ in length");
  if (logits.empty()) throw std::invalid_argument("bce: empty batch");
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = std::clamp(Sigmoid(logits[i]), kProbFloor, 1.0 - kProbFloor);
    const double y = labels[i];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return total / static_cast<double>(logits.size());
}

void AdamStep(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector> &grads,
              AdamState &state, const TrainConfig &cfg) {
  if (params.size() != grads.size())
    throw ShapeError("adam: parameter and gradient sizes differ");
  if (state.m.size() == 0 && params.size() != 0) state = AdamState(params.size());
  if (state.m.size() != params.size())
    throw ShapeError("adam: state size does not match parameters");
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params.array() -= cfg.learning_rate * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

void AdamStep(Eigen::Ref<Matrix> params, const Eigen::Ref<const Matrix> &grads,
              AdamState &state, const TrainConfig &cfg) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols())
    throw ShapeError("adam: parameter and gradient shapes differ");
  Vector flat = params.reshaped();
  const Vector g = grads.reshaped();
  AdamStep(Eigen::Ref<Vector>(flat), g, state, cfg);
  params = flat.reshaped(params.rows(), params.cols());
}

Matrix GlorotUniform(Eigen::Index rows, Eigen::Index cols, SplitMix64 &rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  // Row-major fill order so the draw sequence is independent of storage.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.Uniform(-a, a);
  return w;
}

}  // namespace dreq
