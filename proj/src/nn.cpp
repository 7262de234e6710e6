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

#include "lefl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lefl/kernels.hpp"
#include "lefl/rng.hpp"

namespace lefl::nn {
namespace {

struct LayerOffsets {
  std::size_t fan_in;
  std::size_t fan_out;
  std::size_t weights;  // offset of the weight block
  std::size_t bias;     // offset of the bias block
};

std::vector<LayerOffsets> layer_offsets(const ModelSpec& spec) {
  std::vector<LayerOffsets> out;
  out.reserve(spec.num_weight_layers());
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t fi = spec.layer_sizes[l];
    const std::size_t fo = spec.layer_sizes[l + 1];
    out.push_back({fi, fo, pos, pos + fi * fo});
    pos += fi * fo + fo;
  }
  return out;
}

void check_params(const ModelParams& params) {
  params.spec.validate();
  if (params.values.size() != params.spec.num_params()) {
    throw std::invalid_argument("model parameter count " + std::to_string(params.values.size()) +
                                " does not match spec (" +
                                std::to_string(params.spec.num_params()) + ")");
  }
}

void check_batch(const ModelParams& params, const Matrix& batch) {
  if (batch.cols() != params.spec.input_dim()) {
    throw std::invalid_argument("batch has " + std::to_string(batch.cols()) +
                                " columns, model expects " +
                                std::to_string(params.spec.input_dim()));
  }
}

void softmax_row(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Returns every layer's output; hidden layers post-ReLU. The final entry holds
// logits when `keep_logits` is set and softmax probabilities otherwise.
std::vector<Matrix> run_layers(const ModelParams& params, const Matrix& batch, bool keep_logits) {
  const auto layers = layer_offsets(params.spec);
  const std::span<const double> w(params.values);
  std::vector<Matrix> acts;
  acts.reserve(layers.size());
  const Matrix* input = &batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    Matrix out(batch.rows(), L.fan_out);
    for (std::size_t r = 0; r < batch.rows(); ++r) {
      const auto x = input->row(r);
      auto z = out.row(r);
      for (std::size_t j = 0; j < L.fan_out; ++j) {
        z[j] = w[L.bias + j] + kernels::dot(w.subspan(L.weights + j * L.fan_in, L.fan_in), x);
      }
      if (l + 1 < layers.size()) {
        for (double& v : z) v = v > 0.0 ? v : 0.0;
      } else if (!keep_logits) {
        softmax_row(z);
      }
    }
    acts.push_back(std::move(out));
    input = &acts.back();
  }
  return acts;
}

}  // namespace

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("model spec needs at least an input and an output layer");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("model spec has a zero-width layer");
  }
  if (layer_sizes.back() < 2) {
    throw std::invalid_argument("model spec needs at least two output classes");
  }
}

std::size_t ModelSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return n;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams params{spec, std::vector<double>(spec.num_params(), 0.0)};
  Rng rng(seed);
  for (const auto& L : layer_offsets(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(L.fan_in + L.fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < L.fan_in * L.fan_out; ++i) params.values[L.weights + i] = dist(rng);
  }
  return params;
}

ModelParams zero_params(const ModelSpec& spec) {
  spec.validate();
  return ModelParams{spec, std::vector<double>(spec.num_params(), 0.0)};
}

ForwardResult forward(const ModelParams& params, const Matrix& batch) {
  check_params(params);
  check_batch(params, batch);
  auto acts = run_layers(params, batch, /*keep_logits=*/false);
  ForwardResult result;
  result.soft.probs = std::move(acts.back());
  result.latent = acts.size() >= 2 ? std::move(acts[acts.size() - 2]) : batch;
  return result;
}

std::vector<Matrix> layer_activations(const ModelParams& params, const Matrix& batch) {
  check_params(params);
  check_batch(params, batch);
  return run_layers(params, batch, /*keep_logits=*/false);
}

LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& batch,
                          std::span<const int> labels, double prox_mu,
                          const ModelParams* anchor) {
  check_params(params);
  check_batch(params, batch);
  if (labels.size() != batch.rows()) {
    throw std::invalid_argument("label count does not match batch rows");
  }
  if (batch.rows() == 0) throw std::invalid_argument("empty batch");
  if (!(prox_mu >= 0.0) || !std::isfinite(prox_mu)) {
    throw std::invalid_argument("prox_mu must be finite and >= 0");
  }
  if (prox_mu > 0.0) {
    if (anchor == nullptr) throw std::invalid_argument("prox_mu > 0 requires an anchor");
    if (anchor->values.size() != params.values.size()) {
      throw std::invalid_argument("anchor length does not match params");
    }
  }
  if (!all_finite(params.values) || !all_finite(batch.values())) {
    throw std::invalid_argument("non-finite parameters or inputs");
  }
  const std::size_t K = params.spec.num_classes();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw std::invalid_argument("label out of range: " + std::to_string(y));
    }
  }

  const auto layers = layer_offsets(params.spec);
  auto acts = run_layers(params, batch, /*keep_logits=*/true);
  const std::size_t m = batch.rows();
  const double inv_m = 1.0 / static_cast<double>(m);

  LossAndGrad out;
  out.grad.assign(params.values.size(), 0.0);
  const std::span<const double> w(params.values);
  std::span<double> g(out.grad);

  // Output delta: (softmax - onehot) / m, turning logits into the delta in place.
  Matrix delta = std::move(acts.back());
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    auto z = delta.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[static_cast<std::size_t>(labels[r])];
    for (double& v : z) v = std::exp(v - lse) * inv_m;
    z[static_cast<std::size_t>(labels[r])] -= inv_m;
  }
  loss *= inv_m;

  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& L = layers[li];
    const Matrix& input = li == 0 ? batch : acts[li - 1];
    Matrix prev_delta;
    if (li > 0) prev_delta = Matrix(m, L.fan_in);
    for (std::size_t r = 0; r < m; ++r) {
      const auto x = input.row(r);
      const auto d = delta.row(r);
      for (std::size_t j = 0; j < L.fan_out; ++j) {
        if (d[j] == 0.0) continue;
        kernels::axpy(d[j], x, g.subspan(L.weights + j * L.fan_in, L.fan_in));
        g[L.bias + j] += d[j];
        if (li > 0) kernels::axpy(d[j], w.subspan(L.weights + j * L.fan_in, L.fan_in), prev_delta.row(r));
      }
      if (li > 0) {
        auto pd = prev_delta.row(r);
        for (std::size_t i = 0; i < L.fan_in; ++i) {
          if (!(x[i] > 0.0)) pd[i] = 0.0;
        }
      }
    }
    if (li > 0) delta = std::move(prev_delta);
  }

  if (prox_mu > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double diff = w[i] - anchor->values[i];
      sq += diff * diff;
      g[i] += prox_mu * diff;
    }
    loss += 0.5 * prox_mu * sq;
  }
  out.loss = loss;
  return out;
}

void sgd_step_inplace(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size()) throw std::invalid_argument("sgd_step: length mismatch");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("sgd_step: lr must be > 0");
  if (!all_finite(grad)) throw std::invalid_argument("sgd_step: non-finite gradient");
  kernels::axpy(-lr, grad, params);
}

ModelParams sgd_step(const ModelParams& params, std::span<const double> grad, double lr) {
  ModelParams next = params;
  sgd_step_inplace(next.values, grad, lr);
  return next;
}

void LearningRate::validate() const {
  if (!(base > 0.0) || !std::isfinite(base)) throw std::invalid_argument("lr must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay must be in (0, 1]");
}

double LearningRate::at_epoch(std::size_t epoch) const {
  return base * std::pow(decay, static_cast<double>(epoch));
}

}  // namespace lefl::nn
