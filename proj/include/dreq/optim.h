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

#ifndef DREQ_OPTIM_H_
#define DREQ_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "dreq/embeddings.h"

namespace dreq {

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 20;
  int epochs = 20;
  uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool finetune_entity_embeddings = false;
  // Stop once the epoch loss has improved by less than min_improvement for
  // patience consecutive epochs.
  double min_improvement = 1e-5;
  int patience = 3;

  void Validate() const;
};

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-12;

// Mean binary cross-entropy of sigmoid(logits) against {0,1} labels.
double BceLoss(std::span<const double> logits, std::span<const double> labels);

// d(mean BCE)/d(logit_i) for one example of a batch of size n.
inline double BceLogitGradient(double logit, double label, std::size_t n) {
  return (Sigmoid(logit) - label) / static_cast<double>(n);
}

// First and second moment estimates for one flat parameter block.
struct AdamState {
  Vector m;
  Vector v;
  int64_t step = 0;

  explicit AdamState(Eigen::Index size = 0)
      : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

// One bias-corrected Adam update, in place.
void AdamStep(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector> &grads,
              AdamState &state, const TrainConfig &cfg);

// Same update for a matrix-shaped block; the state covers all coefficients.
void AdamStep(Eigen::Ref<Matrix> params, const Eigen::Ref<const Matrix> &grads,
              AdamState &state, const TrainConfig &cfg);

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Matrix GlorotUniform(Eigen::Index rows, Eigen::Index cols, SplitMix64 &rng);

}  // namespace dreq

#endif  // DREQ_OPTIM_H_
