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
#include <vector>

#include <gtest/gtest.h>

#include "lefl/kernels.hpp"

namespace lefl::kernels {
namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<const KernelTable*> simd_tables() {
  std::vector<const KernelTable*> out;
  if (backend_supported(Backend::kAvx2)) out.push_back(avx2_table());
  if (backend_supported(Backend::kNeon)) out.push_back(neon_table());
  return out;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

TEST(Kernels, ScalarDotByHand) {
  const std::vector<double> a = {1, 2, 3}, b = {4, -5, 6};
  EXPECT_EQ(scalar_table().dot(a.data(), b.data(), 3), 12.0);
  EXPECT_EQ(scalar_table().squared_distance(a.data(), b.data(), 3), 9.0 + 49.0 + 9.0);
  EXPECT_EQ(scalar_table().dot(a.data(), b.data(), 0), 0.0);
}

TEST(Kernels, ScalarAxpyAndScale) {
  std::vector<double> x = {1, 2, 3}, y = {1, 1, 1};
  scalar_table().axpy(2.0, x.data(), y.data(), 3);
  EXPECT_EQ(y, (std::vector<double>{3, 5, 7}));
  scalar_table().scale(0.5, y.data(), 3);
  EXPECT_EQ(y, (std::vector<double>{1.5, 2.5, 3.5}));
}

TEST(Kernels, SimdMatchesScalarOverLengths) {
  const auto tables = simd_tables();
  if (tables.empty()) GTEST_SKIP() << "no SIMD backend on this machine";
  std::mt19937_64 rng(11);
  const auto& ref = scalar_table();
  for (const auto* t : tables) {
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto a = random_vector(n, rng), b = random_vector(n, rng);
      EXPECT_TRUE(close(t->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n)))
          << backend_name(t->backend) << " dot n=" << n;
      EXPECT_TRUE(close(t->squared_distance(a.data(), b.data(), n),
                        ref.squared_distance(a.data(), b.data(), n)))
          << backend_name(t->backend) << " sqdist n=" << n;
      auto y1 = b, y2 = b;
      t->axpy(-0.7, a.data(), y1.data(), n);
      ref.axpy(-0.7, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_TRUE(close(y1[i], y2[i]));
      auto s1 = a, s2 = a;
      t->scale(1.3, s1.data(), n);
      ref.scale(1.3, s2.data(), n);
      EXPECT_EQ(s1, s2);  // one multiply per element: exact
    }
  }
}

TEST(Kernels, SimdAxpyDoesNotTouchPastEnd) {
  for (const auto* t : simd_tables()) {
    std::vector<double> x(9, 1.0), y(12, 5.0);
    t->axpy(1.0, x.data(), y.data(), 9);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], 6.0);
    for (std::size_t i = 9; i < 12; ++i) EXPECT_EQ(y[i], 5.0);
  }
}

TEST(Kernels, BackendOverride) {
  const Backend before = active_backend();
  set_kernel_backend(Backend::kScalar);
  EXPECT_EQ(active_backend(), Backend::kScalar);
  EXPECT_EQ(&active(), &scalar_table());
  if (!backend_supported(Backend::kNeon)) {
    EXPECT_THROW(set_kernel_backend(Backend::kNeon), std::exception);
  }
  set_kernel_backend(before);
  EXPECT_EQ(active_backend(), before);
}

}  // namespace
}  // namespace lefl::kernels
