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

// Evaluation: label-distribution entropy of sampled clients, latent-space
// cluster statistics, linear CKA, accuracy tracking and the byte ledger.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lefl/data.hpp"
#include "lefl/matrix.hpp"
#include "lefl/nn.hpp"
#include "lefl/sampling.hpp"
#include "lefl/types.hpp"

namespace lefl::metrics {

struct LabelHistogram {
  std::vector<std::size_t> counts;
  std::size_t total = 0;

  std::vector<double> distribution() const;
};

LabelHistogram label_histogram(std::span<const int> labels, std::size_t num_classes);

// Histogram of the labels owned by the listed clients.
LabelHistogram union_histogram(std::span<const std::size_t> clients, const data::Partition& p,
                               std::span<const int> labels, std::size_t num_classes);

// KL(label distribution of the sampled clients' union || label distribution
// of every partitioned sample). Throws std::invalid_argument when the union
// is empty.
double sample_relative_entropy(const sampling::SamplingPlan& plan, const data::Partition& p,
                               std::span<const int> labels, std::size_t num_classes);

struct LatentGap {
  double intra_mean = 0.0;
  double random_mean = 0.0;
};

// `latents[i]` holds client i's last-hidden-layer activations on a shared
// probe batch. Distances are between per-client mean latent vectors;
// random_mean averages the same statistic over `permutations` shuffles of
// the cluster labels. Throws std::invalid_argument if every cluster is a
// singleton.
LatentGap latent_cluster_gap(std::span<const Matrix> latents,
                             const sampling::ClusterAssignment& assign, std::uint64_t seed,
                             std::size_t permutations = 20);

struct CkaResult {
  double value = 0.0;
  // Set when either input has zero variance; value is 0 then.
  bool degenerate = false;
};

// Linear CKA between activation matrices over the same m >= 2 inputs.
CkaResult linear_cka(const Matrix& a, const Matrix& b);

// CKA between every pair of (layer of a, layer of b) on the probe batch.
Matrix cka_layer_map(const nn::ModelParams& a, const nn::ModelParams& b, const Matrix& probe);

std::string grid_to_csv(const Matrix& m);

// --- communication ledger -------------------------------------------------

struct CostModel {
  std::uint64_t model_bytes = 0;       // one copy of the model
  std::size_t num_clients = 0;         // n, for the one-time term
  std::uint64_t public_bytes = 0;      // probe dataset, per client download
  std::uint64_t soft_label_bytes = 0;  // soft labels, per client upload

  std::uint64_t one_time_bytes() const noexcept {
    return static_cast<std::uint64_t>(num_clients) * (public_bytes + soft_label_bytes);
  }
};

// Bytes for `params` values at kBytesPerValue each.
std::uint64_t wire_bytes(std::size_t values) noexcept;

struct CostRecord {
  std::size_t round = 0;
  std::uint64_t per_client_down_bytes = 0;
  std::uint64_t per_client_up_bytes = 0;
  std::uint64_t one_time_bytes = 0;
  std::uint64_t round_bytes = 0;
  std::uint64_t cumulative_bytes = 0;
};

// Traffic for one round: every sampled client downloads and uploads the
// model; SCAFFOLD moves a control vector of the same size each way as well.
// With `include_one_time`, adds the probe download and soft-label upload for
// all n clients.
CostRecord comm_cost_step(const CostModel& model, const sampling::SamplingPlan& plan,
                          Algorithm algorithm, bool include_one_time,
                          std::uint64_t previous_cumulative);

// --- accuracy ---------------------------------------------------------------

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax accuracy (ties resolve to the lowest class) and mean cross-entropy.
Evaluation evaluate_global(const nn::ModelParams& params, const data::Dataset& test);

struct RoundMetrics {
  std::size_t round = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double sample_relative_entropy = 0.0;
  std::uint64_t cumulative_bytes = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

// First round whose accuracy reaches `target`, or nullopt.
std::optional<std::size_t> rounds_to_target(std::span<const RoundMetrics> stream, double target);

// "round,accuracy,loss,entropy,cumulative_bytes" plus one row per round.
std::string metrics_to_csv(std::span<const RoundMetrics> stream);
std::vector<RoundMetrics> metrics_from_csv(const std::string& text);

}  // namespace lefl::metrics
