/*
 * Copyright 2026 The LEFL Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// A small fully connected classifier: ReLU hidden layers, softmax output.
// Parameters live in one flat vector, layer by layer, each layer stored as
// its weight matrix (fan_out x fan_in, row-major) followed by its bias.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lefl/matrix.hpp"

namespace lefl::nn {

inline constexpr double kProbabilityFloor = 1e-12;

enum class Activation { kRelu };

struct ModelSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::kRelu;

  // Throws std::invalid_argument when fewer than two layers, any size is
  // zero, or the output has fewer than two classes.
  void validate() const;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_weight_layers() const { return layer_sizes.size() - 1; }
  // Width of the layer feeding the softmax; the input width for a model
  // without hidden layers.
  std::size_t latent_dim() const { return layer_sizes[layer_sizes.size() - 2]; }
  std::size_t num_params() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ModelParams {
  ModelSpec spec;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Softmax outputs, one probability row per input row.
struct SoftLabels {
  Matrix probs;
};

struct ForwardResult {
  SoftLabels soft;
  // Post-activation output of the last hidden layer, one row per input.
  Matrix latent;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

// All-zero parameters for `spec`.
ModelParams zero_params(const ModelSpec& spec);

ForwardResult forward(const ModelParams& params, const Matrix& batch);

// Post-activation output of every weight layer (hidden layers after ReLU,
// final layer after softmax).
std::vector<Matrix> layer_activations(const ModelParams& params, const Matrix& batch);

// Mean softmax cross-entropy over the batch plus (prox_mu / 2) * ||params - anchor||^2.
// `anchor` is required when prox_mu > 0 and ignored otherwise.
LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& batch,
                          std::span<const int> labels, double prox_mu = 0.0,
                          const ModelParams* anchor = nullptr);

// params - lr * grad.
ModelParams sgd_step(const ModelParams& params, std::span<const double> grad, double lr);
void sgd_step_inplace(std::span<double> params, std::span<const double> grad, double lr);

// Step size for local epoch `epoch` (0-based): lr * decay^epoch.
struct LearningRate {
  double base = 0.01;
  double decay = 1.0;

  // Throws std::invalid_argument unless base > 0 and decay in (0, 1].
  void validate() const;
  double at_epoch(std::size_t epoch) const;
};

}  // namespace lefl::nn
