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

// One-time client clustering: every client trains the initial global model on
// its own data, predicts soft labels for the public probe set, and the server
// clusters the resulting KL similarity matrix.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lefl/data.hpp"
#include "lefl/fl.hpp"
#include "lefl/metrics.hpp"
#include "lefl/sampling.hpp"

namespace lefl::sampling {

struct PreprocessConfig {
  fl::LocalTrainConfig local;
  // Overrides default_cluster_count(n) when set.
  std::optional<std::size_t> cluster_k;
  SoftLabelReduction reduction = SoftLabelReduction::kPerSampleMean;
  KMeansOptions kmeans;
  std::uint64_t cluster_seed = 0;
  std::size_t workers = 1;
};

struct PreprocessResult {
  SimilarityMatrix similarity;
  ClusterAssignment clusters;
  // One-time probe download and soft-label upload for all clients.
  metrics::CostRecord cost;
  // Local training of every client, usable as round server.round + 1.
  std::vector<fl::LocalTrainResult> local;
  std::vector<nn::SoftLabels> soft_labels;
  // Last-hidden-layer activations of each client's model on the probe set.
  std::vector<Matrix> latents;
};

// Throws std::invalid_argument for an empty probe set or client list, and
// std::runtime_error if a client's local model diverges.
PreprocessResult preprocess_lefl(std::span<const fl::ClientState> clients,
                                 const fl::ServerState& server, const data::Dataset& train,
                                 const data::PublicDataset& probe, const PreprocessConfig& cfg,
                                 const metrics::CostModel& cost);

}  // namespace lefl::sampling
