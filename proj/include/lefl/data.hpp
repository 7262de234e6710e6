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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lefl/matrix.hpp"

namespace lefl::data {

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  // Throws std::invalid_argument on row-count mismatch, out-of-range labels
  // or an empty dataset.
  void validate() const;
};

// Unlabeled probe inputs.
struct PublicDataset {
  Matrix features;
  std::size_t size() const noexcept { return features.rows(); }
};

// Sample indices owned by each client; clients[i] belongs to client id i.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;

  std::size_t num_clients() const noexcept { return clients.size(); }
  std::size_t total_samples() const noexcept;
};

// A set of clients sharing one label list, for hand-built splits.
struct ManualGroup {
  std::size_t client_count = 0;
  std::vector<int> labels;
};

// One isotropic Gaussian per class around a mean drawn on the unit sphere.
Dataset synth_blobs(std::size_t num_classes, std::size_t dim, std::size_t per_class, double spread,
                    std::uint64_t seed);

// Splits off the first `per_class_test` samples of every class as a test set.
// Returns {train, test}.
std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, std::size_t per_class_test);

// Uniform samples from the cube [kPublicLow, kPublicHigh]^dim, away from the blobs.
inline constexpr double kPublicLow = -1.0;
inline constexpr double kPublicHigh = 2.0;
PublicDataset synth_public(std::size_t dim, std::size_t count, std::uint64_t seed);

// Distribution-based label skew. Per class, proportions ~ Dir(beta) over the
// clients, rounded by largest remainder; clients left empty take one sample
// from the currently largest client.
Partition partition_dirichlet(const Dataset& ds, std::size_t num_clients, double beta,
                              std::uint64_t seed);

// Shuffled samples dealt to clients in near-equal shards.
Partition partition_iid(const Dataset& ds, std::size_t num_clients, std::uint64_t seed);

// Quantity-based label skew: each client holds exactly `labels_per_client`
// distinct labels, every label has at least one holder, and each label's
// samples are split evenly among its holders.
Partition partition_quantity(const Dataset& ds, std::size_t num_clients,
                             std::size_t labels_per_client, std::uint64_t seed);

// Label sets chosen by partition_quantity, exposed for inspection.
std::vector<std::vector<int>> quantity_label_sets(std::size_t num_classes, std::size_t num_clients,
                                                  std::size_t labels_per_client,
                                                  std::uint64_t seed);

// Groups are laid out in order: group 0 owns clients [0, c0), group 1 the next c1, ...
Partition partition_manual(const Dataset& ds, std::span<const ManualGroup> groups);

// Every partitioner guarantees these; throws std::logic_error naming the violation.
void check_partition(const Partition& p, std::size_t dataset_size);

// Headerless CSV: dim real columns followed by one integer label column.
// num_classes is max(label) + 1 unless `num_classes` is non-zero.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes = 0);

// {"0": [indices...], "1": [...], ...}
std::string partition_to_json(const Partition& p);

}  // namespace lefl::data
