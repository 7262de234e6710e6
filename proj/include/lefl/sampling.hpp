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

// Client similarity from soft labels, clustering, and per-round client
// selection (stratified over clusters, or uniform).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lefl/matrix.hpp"
#include "lefl/nn.hpp"

namespace lefl::sampling {

// Pairwise divergences between clients; values(i, j) = KL(p_i || p_j).
struct SimilarityMatrix {
  Matrix values;
  std::size_t size() const noexcept { return values.rows(); }
};

struct ClusterAssignment {
  std::vector<int> labels;
  std::size_t k = 0;

  std::vector<std::size_t> cluster_sizes() const;
  std::vector<std::vector<std::size_t>> members() const;
};

struct SamplingPlan {
  std::size_t round = 0;
  std::vector<std::size_t> selected;  // sorted, unique
  std::vector<std::size_t> per_cluster_quota;  // empty for uniform plans
};

enum class SoftLabelReduction {
  kPerSampleMean,     // mean over probe samples of per-sample KL
  kMeanDistribution,  // KL between the clients' mean output distributions
};

// Natural-log KL(p || q). Both inputs are floored at 1e-12 and renormalized
// first; the result is clamped at 0. Throws std::invalid_argument on length
// mismatch or an empty vector.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Throws std::invalid_argument if the soft-label sets differ in shape or the
// list is empty.
SimilarityMatrix build_similarity_matrix(
    std::span<const nn::SoftLabels> soft,
    SoftLabelReduction reduction = SoftLabelReduction::kPerSampleMean);

struct KMeansOptions {
  std::size_t max_iter = 300;
  std::size_t n_init = 10;
};

struct KMeansResult {
  ClusterAssignment assignment;
  double inertia = 0.0;
  // Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_trace;
};

// Lloyd's algorithm over the rows of `points`, seeded random-point
// initialization, best of n_init restarts by inertia. Throws if k == 0 or
// k > rows.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

// Clusters clients using each similarity-matrix row as the client's feature vector.
ClusterAssignment kmeans_cluster(const SimilarityMatrix& m, std::size_t k, std::uint64_t seed,
                                 const KMeansOptions& options = {});

// max(1, round(log2(n))).
std::size_t default_cluster_count(std::size_t n);

// Largest-remainder allocation of `budget` proportional to `sizes`; ties go
// to the lower index.
std::vector<std::size_t> proportional_quotas(std::span<const std::size_t> sizes,
                                             std::size_t budget);

SamplingPlan stratified_sample(const ClusterAssignment& assign, std::size_t budget,
                               std::size_t round, std::uint64_t seed);

SamplingPlan uniform_sample(std::size_t n, std::size_t budget, std::size_t round,
                            std::uint64_t seed);

// n rows of n comma-separated values at round-trip precision.
std::string similarity_to_csv(const SimilarityMatrix& m);
// {"0": cluster, "1": cluster, ...}
std::string clusters_to_json(const ClusterAssignment& a);

}  // namespace lefl::sampling
