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

#include <cstddef>
#include <string>
#include <string_view>

namespace lefl {

enum class Algorithm { kFedAvg, kFedProx, kScaffold, kFedNova };

std::string_view algorithm_name(Algorithm a) noexcept;
// Throws std::invalid_argument for unknown names.
Algorithm parse_algorithm(std::string_view name);

// Bytes charged per parameter on the wire.
inline constexpr std::size_t kBytesPerValue = 4;

}  // namespace lefl
