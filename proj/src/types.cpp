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

#include "lefl/types.hpp"

#include <stdexcept>

namespace lefl {

std::string_view algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::kFedAvg:
      return "fedavg";
    case Algorithm::kFedProx:
      return "fedprox";
    case Algorithm::kScaffold:
      return "scaffold";
    case Algorithm::kFedNova:
      return "fednova";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::kFedAvg, Algorithm::kFedProx, Algorithm::kScaffold,
                      Algorithm::kFedNova}) {
    if (name == algorithm_name(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected fedavg, fedprox, scaffold or fednova)");
}

}  // namespace lefl
