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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lefl/nn.hpp"

namespace lefl::nn {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& x : m.values()) x = u(rng);
  return m;
}

TEST(InitParams, DeterministicAndShaped) {
  const ModelSpec spec{{4, 3, 2}};
  const auto a = init_params(spec, 7), b = init_params(spec, 7);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.size(), 4u * 3 + 3 + 3 * 2 + 2);
  EXPECT_EQ(spec.num_params(), 23u);
}

TEST(InitParams, SeedSensitive) {
  const ModelSpec spec{{2, 2}};
  EXPECT_NE(init_params(spec, 1).values, init_params(spec, 2).values);
}

TEST(InitParams, GlorotRangeAndZeroBias) {
  const ModelSpec spec{{16, 32, 10}};
  const auto p = init_params(spec, 3);
  const double lim1 = std::sqrt(6.0 / 48.0);
  for (std::size_t i = 0; i < 16 * 32; ++i) EXPECT_LE(std::abs(p.values[i]), lim1);
  for (std::size_t i = 16 * 32; i < 16 * 32 + 32; ++i) EXPECT_EQ(p.values[i], 0.0);
}

TEST(ModelSpec, RejectsBadShapes) {
  EXPECT_THROW((ModelSpec{{4}}.validate()), std::invalid_argument);
  EXPECT_THROW((ModelSpec{{4, 0, 2}}.validate()), std::invalid_argument);
  EXPECT_THROW(init_params(ModelSpec{{3, 1}}, 1), std::invalid_argument);
}

TEST(Forward, ZeroParamsGiveUniformRows) {
  const auto p = zero_params(ModelSpec{{3, 5, 4}});
  std::mt19937_64 rng(1);
  const auto out = forward(p, random_matrix(6, 3, rng));
  for (std::size_t r = 0; r < 6; ++r) {
    for (double v : out.soft.probs.row(r)) EXPECT_DOUBLE_EQ(v, 0.25);
  }
}

TEST(Forward, RowsSumToOne) {
  std::mt19937_64 rng(2);
  const auto p = init_params(ModelSpec{{5, 8, 7, 3}}, 9);
  const auto out = forward(p, random_matrix(50, 5, rng, -30.0, 30.0));
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0.0;
    for (double v : out.soft.probs.row(r)) {
      EXPECT_TRUE(std::isfinite(v));
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_EQ(out.latent.rows(), 50u);
  EXPECT_EQ(out.latent.cols(), 7u);
}

TEST(Forward, TinyNetByHand) {
  // 1 input -> 1 hidden (relu) -> 2 classes
  ModelParams p = zero_params(ModelSpec{{1, 1, 2}});  // W1 b1 W2(2x1) b2
  p.values = {0.5, 0.1, 1.0, -1.0, 0.0, 0.3};
  const Matrix x(2, 1, std::vector<double>{2.0, -4.0});
  const auto out = forward(p, x);
  const double h = 0.5 * 2.0 + 0.1;
  const double z0 = h, z1 = -h + 0.3;
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
  EXPECT_NEAR(out.soft.probs(0, 0), p0, 1e-15);
  EXPECT_NEAR(out.latent(0, 0), h, 1e-15);
  // negative pre-activation: hidden unit is off, logits are the biases
  EXPECT_EQ(out.latent(1, 0), 0.0);
  EXPECT_NEAR(out.soft.probs(1, 1), std::exp(0.3) / (1.0 + std::exp(0.3)), 1e-15);
}

TEST(Forward, RejectsWrongWidth) {
  const auto p = init_params(ModelSpec{{3, 2}}, 1);
  EXPECT_THROW(forward(p, Matrix(2, 4)), std::invalid_argument);
}

TEST(LayerActivations, OnePerWeightLayer) {
  std::mt19937_64 rng(4);
  const auto p = init_params(ModelSpec{{3, 6, 5, 2}}, 1);
  const auto x = random_matrix(10, 3, rng);
  const auto acts = layer_activations(p, x);
  ASSERT_EQ(acts.size(), 3u);
  EXPECT_EQ(acts[1], forward(p, x).latent);
  EXPECT_EQ(acts[2], forward(p, x).soft.probs);
}

double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

TEST(LossAndGrad, MatchesCentralDifferences) {
  std::mt19937_64 rng(20240611);
  const double h = 1e-5;
  for (int instance = 0; instance < 20; ++instance) {
    std::uniform_int_distribution<std::size_t> width(1, 6);
    const std::size_t d = width(rng), hidden = width(rng), k = 2 + instance % 4;
    const ModelSpec spec = instance % 3 == 0 ? ModelSpec{{d, hidden, width(rng), k}} : ModelSpec{{d, hidden, k}};
    // Random biases too: zero biases put pre-activations exactly on the ReLU
    // kink whenever a whole hidden layer is off, where differences are one-sided.
    auto params = init_params(spec, 100 + instance);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (auto& v : params.values) v += jitter(rng);
    const auto anchor = init_params(spec, 200 + instance);
    const double mu = instance % 2 == 0 ? 0.0 : 0.37;
    const std::size_t m = 1 + instance % 7;
    const auto x = random_matrix(m, d, rng, -2.0, 2.0);
    std::vector<int> y(m);
    for (auto& v : y) v = static_cast<int>(rng() % k);

    const auto lg = loss_and_grad(params, x, y, mu, &anchor);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = params, minus = params;
      plus.values[i] += h;
      minus.values[i] -= h;
      const double numeric =
          (loss_and_grad(plus, x, y, mu, &anchor).loss - loss_and_grad(minus, x, y, mu, &anchor).loss) / (2 * h);
      const double analytic = lg.grad[i];
      const bool ok = std::abs(numeric - analytic) <= 1e-6 || relative_gap(numeric, analytic) <= 1e-4;
      EXPECT_TRUE(ok) << "instance " << instance << " param " << i << ": " << analytic << " vs " << numeric;
    }
  }
}

TEST(LossAndGrad, ZeroMuIsPlainObjective) {
  std::mt19937_64 rng(5);
  const ModelSpec spec{{4, 5, 3}};
  const auto p = init_params(spec, 1), anchor = init_params(spec, 2);
  const auto x = random_matrix(8, 4, rng);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1};
  const auto plain = loss_and_grad(p, x, y);
  const auto prox = loss_and_grad(p, x, y, 0.0, &anchor);
  EXPECT_EQ(plain.loss, prox.loss);
  EXPECT_EQ(plain.grad, prox.grad);
}

TEST(LossAndGrad, ProxVanishesAtAnchor) {
  std::mt19937_64 rng(6);
  const auto p = init_params(ModelSpec{{4, 5, 3}}, 1);
  const auto x = random_matrix(8, 4, rng);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1};
  const auto plain = loss_and_grad(p, x, y);
  const auto prox = loss_and_grad(p, x, y, 2.5, &p);
  EXPECT_EQ(plain.loss, prox.loss);
  EXPECT_EQ(plain.grad, prox.grad);
}

TEST(LossAndGrad, ZeroParamsLossIsLogK) {
  const auto p = zero_params(ModelSpec{{2, 3, 5}});
  const auto lg = loss_and_grad(p, Matrix(3, 2, 1.0), std::vector<int>{0, 3, 4});
  EXPECT_NEAR(lg.loss, std::log(5.0), 1e-12);
}

TEST(LossAndGrad, Errors) {
  const auto p = init_params(ModelSpec{{2, 3}}, 1);
  const Matrix x(2, 2, 0.5);
  EXPECT_THROW(loss_and_grad(p, x, std::vector<int>{0}), std::invalid_argument);
  EXPECT_THROW(loss_and_grad(p, x, std::vector<int>{0, 3}), std::invalid_argument);
  EXPECT_THROW(loss_and_grad(p, x, std::vector<int>{0, 1}, 0.1, nullptr), std::invalid_argument);
  Matrix bad(2, 2, 0.5);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(loss_and_grad(p, bad, std::vector<int>{0, 1}), std::exception);
}

TEST(SgdStep, HandValues) {
  std::vector<double> one = {1.0};
  const std::vector<double> two = {2.0};
  sgd_step_inplace(one, two, 0.5);
  EXPECT_EQ(one[0], 0.0);

  const auto p = init_params(ModelSpec{{2, 2}}, 3);
  const std::vector<double> zero(p.size(), 0.0);
  EXPECT_EQ(sgd_step(p, zero, 0.1).values, p.values);
  std::vector<double> g(p.size(), 1.0);
  const auto q = sgd_step(p, g, 0.25);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q.values[i], p.values[i] - 0.25);
}

TEST(SgdStep, RejectsBadStep) {
  const auto p = zero_params(ModelSpec{{1, 2}});
  const std::vector<double> g(p.size(), 1.0);
  EXPECT_THROW(sgd_step(p, g, 0.0), std::invalid_argument);
  EXPECT_THROW(sgd_step(p, g, -1.0), std::invalid_argument);
  auto inf = g;
  inf[0] = INFINITY;
  EXPECT_THROW(sgd_step(p, inf, 0.1), std::exception);
}

TEST(LearningRate, DecaysPerEpoch) {
  const LearningRate lr{0.1, 0.5};
  EXPECT_DOUBLE_EQ(lr.at_epoch(0), 0.1);
  EXPECT_DOUBLE_EQ(lr.at_epoch(2), 0.025);
  EXPECT_THROW((LearningRate{0.1, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((LearningRate{0.1, 1.5}.validate()), std::invalid_argument);
}

TEST(Training, RepeatedStepsAreBitIdentical) {
  std::mt19937_64 rng(8);
  const auto x = random_matrix(16, 4, rng);
  std::vector<int> y(16);
  for (std::size_t i = 0; i < 16; ++i) y[i] = static_cast<int>(i % 3);
  auto run = [&] {
    auto p = init_params(ModelSpec{{4, 6, 3}}, 42);
    for (int s = 0; s < 50; ++s) p = sgd_step(p, loss_and_grad(p, x, y).grad, 0.1);
    return p;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace lefl::nn
