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

// Dense double-precision inner-loop kernels. Every routine has a scalar
// reference implementation and, where the target supports it, an AVX2+FMA
// (x86-64) or NEON (aarch64) variant. The variant is chosen once at startup
// from the CPU's capabilities and can be pinned with LEFL_KERNELS=scalar|avx2|neon
// or set_kernel_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace lefl::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
// Null when the variant was not compiled in for this target.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

bool backend_supported(Backend backend) noexcept;
std::string_view backend_name(Backend backend) noexcept;

// The table used by every caller in the library.
const KernelTable& active() noexcept;
Backend active_backend() noexcept;

// Throws std::invalid_argument if the backend is not supported on this CPU.
// Not thread-safe with respect to concurrent kernel calls.
void set_kernel_backend(Backend backend);

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void scale(double alpha, std::span<double> x) noexcept {
  active().scale(alpha, x.data(), x.size());
}

}  // namespace lefl::kernels
