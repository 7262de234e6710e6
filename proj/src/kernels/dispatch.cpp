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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "lefl/kernels.hpp"

namespace lefl::kernels {
namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_table();
    case Backend::kAvx2:
      return cpu_has_avx2_fma() ? avx2_table() : nullptr;
    case Backend::kNeon:
      return neon_table();
  }
  return nullptr;
}

const KernelTable* select_initial() noexcept {
  if (const char* env = std::getenv("LEFL_KERNELS")) {
    const std::string_view want(env);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (want == backend_name(b)) {
        if (const KernelTable* t = table_for(b)) return t;
      }
    }
  }
  if (const KernelTable* t = table_for(Backend::kAvx2)) return t;
  if (const KernelTable* t = table_for(Backend::kNeon)) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{select_initial()};
  return table;
}

}  // namespace

bool backend_supported(Backend backend) noexcept { return table_for(backend) != nullptr; }

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Backend active_backend() noexcept { return active().backend; }

void set_kernel_backend(Backend backend) {
  const KernelTable* t = table_for(backend);
  if (t == nullptr) {
    throw std::invalid_argument("kernel backend not supported on this CPU: " +
                                std::string(backend_name(backend)));
  }
  current().store(t, std::memory_order_relaxed);
}

}  // namespace lefl::kernels
