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

#include "lefl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"
#include "lefl/kernels.hpp"
#include "lefl/rng.hpp"

namespace lefl::sampling {
namespace {

// Floors at kProbabilityFloor and renormalizes, writing into `out`.
void floor_normalize(std::span<const double> p, std::span<double> out) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = std::max(p[i], nn::kProbabilityFloor);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

// Moves the first `count` elements of a uniformly shuffled `items` to the front.
void partial_shuffle(std::vector<std::size_t>& items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

struct LloydRun {
  std::vector<int> labels;
  double inertia = 0.0;
  std::vector<double> trace;
};

double assign_points(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                     std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = kernels::squared_distance(points.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

// Gives every empty cluster the point farthest from its current centroid,
// taken from a cluster that keeps at least one member.
void repair_empty(const Matrix& points, Matrix& centroids, std::vector<int>& labels,
                  std::vector<double>& dist) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = points.rows();
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (far == points.rows() || dist[i] > dist[far]) far = i;
    }
    --counts[static_cast<std::size_t>(labels[far])];
    labels[far] = static_cast<int>(c);
    counts[c] = 1;
    dist[far] = 0.0;
    std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
  }
}

void update_centroids(const Matrix& points, const std::vector<int>& labels, Matrix& centroids) {
  std::vector<std::size_t> counts(centroids.rows(), 0);
  std::fill(centroids.values().begin(), centroids.values().end(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    kernels::axpy(1.0, points.row(i), centroids.row(c));
    ++counts[c];
  }
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (counts[c] > 0) kernels::scale(1.0 / static_cast<double>(counts[c]), centroids.row(c));
  }
}

LloydRun lloyd(const Matrix& points, std::size_t k, Rng& rng, std::size_t max_iter) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  partial_shuffle(order, k, rng);
  Matrix centroids(k, points.cols());
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(points.row(order[c]).begin(), points.row(order[c]).end(), centroids.row(c).begin());
  }

  LloydRun run;
  run.labels.assign(n, -1);
  std::vector<int> labels(n, 0);
  std::vector<double> dist(n, 0.0);
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iter, 1); ++it) {
    assign_points(points, centroids, labels, dist);
    repair_empty(points, centroids, labels, dist);
    run.trace.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (labels == run.labels) break;
    run.labels = labels;
    update_centroids(points, run.labels, centroids);
  }
  run.labels = labels;
  run.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    run.inertia += kernels::squared_distance(points.row(i),
                                             centroids.row(static_cast<std::size_t>(labels[i])));
  }
  return run;
}

// Renumbers clusters in order of first appearance.
std::vector<int> canonical_labels(const std::vector<int>& labels, std::size_t k) {
  std::vector<int> remap(k, -1);
  int next = 0;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& r = remap[static_cast<std::size_t>(labels[i])];
    if (r < 0) r = next++;
    out[i] = r;
  }
  return out;
}

}  // namespace

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  if (p.empty()) throw std::invalid_argument("kl_divergence: empty distribution");
  std::vector<double> pp(p.size()), qq(q.size());
  floor_normalize(p, pp);
  floor_normalize(q, qq);
  double kl = 0.0;
  for (std::size_t c = 0; c < pp.size(); ++c) kl += pp[c] * std::log(pp[c] / qq[c]);
  return std::max(kl, 0.0);
}

SimilarityMatrix build_similarity_matrix(std::span<const nn::SoftLabels> soft,
                                         SoftLabelReduction reduction) {
  if (soft.empty()) throw std::invalid_argument("build_similarity_matrix: no clients");
  const std::size_t rows = soft.front().probs.rows();
  const std::size_t K = soft.front().probs.cols();
  if (rows == 0 || K == 0) throw std::invalid_argument("build_similarity_matrix: empty soft labels");
  for (const auto& s : soft) {
    if (s.probs.rows() != rows || s.probs.cols() != K) {
      throw std::invalid_argument("build_similarity_matrix: inconsistent soft-label shapes");
    }
  }
  const std::size_t n = soft.size();

  // KL(p||q) = sum p log p - sum p log q on floored, renormalized rows, so
  // each pair reduces to dot products against precomputed logs.
  std::vector<Matrix> probs, logs;
  probs.reserve(n);
  logs.reserve(n);
  for (const auto& s : soft) {
    Matrix p;
    if (reduction == SoftLabelReduction::kMeanDistribution) {
      std::vector<double> mean(K, 0.0);
      for (std::size_t r = 0; r < rows; ++r) kernels::axpy(1.0, s.probs.row(r), mean);
      for (double& v : mean) v /= static_cast<double>(rows);
      p = Matrix(1, K);
      floor_normalize(mean, p.row(0));
    } else {
      p = Matrix(rows, K);
      for (std::size_t r = 0; r < rows; ++r) floor_normalize(s.probs.row(r), p.row(r));
    }
    Matrix l(p.rows(), K);
    for (std::size_t i = 0; i < p.values().size(); ++i) l.values()[i] = std::log(p.values()[i]);
    probs.push_back(std::move(p));
    logs.push_back(std::move(l));
  }
  const double count = static_cast<double>(probs.front().rows());
  std::vector<double> self(n);
  for (std::size_t i = 0; i < n; ++i) self[i] = kernels::dot(probs[i].values(), logs[i].values());

  SimilarityMatrix m{Matrix(n, n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double kl = (self[i] - kernels::dot(probs[i].values(), logs[j].values())) / count;
      m.values(i, j) = std::max(kl, 0.0);
    }
  }
  return m;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > points.rows()) {
    throw std::invalid_argument(fmt::format("kmeans: k = {} exceeds point count {}", k, points.rows()));
  }
  Rng rng(seed);
  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.n_init, 1); ++r) {
    LloydRun run = lloyd(points, k, rng, options.max_iter);
    if (!have || run.inertia < best.inertia) {
      best.assignment.labels = std::move(run.labels);
      best.inertia = run.inertia;
      best.inertia_trace = std::move(run.trace);
      have = true;
    }
  }
  best.assignment.labels = canonical_labels(best.assignment.labels, k);
  best.assignment.k = k;
  return best;
}

ClusterAssignment kmeans_cluster(const SimilarityMatrix& m, std::size_t k, std::uint64_t seed,
                                 const KMeansOptions& options) {
  return kmeans(m.values, k, seed, options).assignment;
}

std::size_t default_cluster_count(std::size_t n) {
  if (n == 0) throw std::invalid_argument("default_cluster_count: n must be >= 1");
  const long k = std::lround(std::log2(static_cast<double>(n)));
  return static_cast<std::size_t>(std::max(1L, k));
}

std::vector<std::size_t> proportional_quotas(std::span<const std::size_t> sizes,
                                             std::size_t budget) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (budget > n) throw std::invalid_argument("proportional_quotas: budget exceeds population");
  std::vector<std::size_t> quotas(sizes.size(), 0);
  if (n == 0) return quotas;
  // Integer arithmetic: budget * size = quota * n + remainder.
  std::vector<std::pair<std::size_t, std::size_t>> rema;  // (remainder, cluster)
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    quotas[c] = budget * sizes[c] / n;
    assigned += quotas[c];
    rema.emplace_back(budget * sizes[c] % n, c);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < budget; ++r, ++assigned) ++quotas[rema[r].second];
  return quotas;
}

SamplingPlan stratified_sample(const ClusterAssignment& assign, std::size_t budget,
                               std::size_t round, std::uint64_t seed) {
  const std::size_t n = assign.labels.size();
  if (budget == 0 || budget > n) {
    throw std::invalid_argument(fmt::format("stratified_sample: budget {} not in [1, {}]", budget, n));
  }
  auto members = assign.members();
  SamplingPlan plan;
  plan.round = round;
  plan.per_cluster_quota = proportional_quotas(assign.cluster_sizes(), budget);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(round)}));
  for (std::size_t c = 0; c < members.size(); ++c) {
    partial_shuffle(members[c], plan.per_cluster_quota[c], rng);
    plan.selected.insert(plan.selected.end(), members[c].begin(),
                         members[c].begin() + static_cast<std::ptrdiff_t>(plan.per_cluster_quota[c]));
  }
  std::sort(plan.selected.begin(), plan.selected.end());
  return plan;
}

SamplingPlan uniform_sample(std::size_t n, std::size_t budget, std::size_t round,
                            std::uint64_t seed) {
  if (budget == 0 || budget > n) {
    throw std::invalid_argument(fmt::format("uniform_sample: budget {} not in [1, {}]", budget, n));
  }
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(round)}));
  partial_shuffle(ids, budget, rng);
  SamplingPlan plan;
  plan.round = round;
  plan.selected.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(budget));
  std::sort(plan.selected.begin(), plan.selected.end());
  return plan;
}

std::string similarity_to_csv(const SimilarityMatrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j > 0) out += ',';
      out += fmt::format("{}", m.values(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string clusters_to_json(const ClusterAssignment& a) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < a.labels.size(); ++i) j[std::to_string(i)] = a.labels[i];
  return j.dump();
}

}  // namespace lefl::sampling
