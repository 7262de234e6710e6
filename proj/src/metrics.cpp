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

#include "lefl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "lefl/kernels.hpp"
#include "lefl/rng.hpp"

namespace lefl::metrics {
namespace {

std::vector<double> mean_row(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) kernels::axpy(1.0, m.row(r), mean);
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

double mean_intra_distance(const std::vector<std::vector<double>>& points,
                           std::span<const int> labels) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (labels[i] != labels[j]) continue;
      sum += std::sqrt(kernels::squared_distance(points[i], points[j]));
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

// Column-centred transpose: out(c, r) = m(r, c) - mean_c.
Matrix centred_transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
    mean /= static_cast<double>(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) t(c, r) = m(r, c) - mean;
  }
  return t;
}

// ||X^T Y||_F^2 given the transposes (columns as rows).
double cross_frobenius_sq(const Matrix& xt, const Matrix& yt) {
  double s = 0.0;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    for (std::size_t j = 0; j < yt.rows(); ++j) {
      const double d = kernels::dot(xt.row(i), yt.row(j));
      s += d * d;
    }
  }
  return s;
}

}  // namespace

std::vector<double> LabelHistogram::distribution() const {
  std::vector<double> d(counts.size(), 0.0);
  if (total == 0) return d;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    d[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  }
  return d;
}

LabelHistogram label_histogram(std::span<const int> labels, std::size_t num_classes) {
  LabelHistogram h{std::vector<std::size_t>(num_classes, 0), 0};
  for (int y : labels) {
    ++h.counts.at(static_cast<std::size_t>(y));
    ++h.total;
  }
  return h;
}

LabelHistogram union_histogram(std::span<const std::size_t> clients, const data::Partition& p,
                               std::span<const int> labels, std::size_t num_classes) {
  LabelHistogram h{std::vector<std::size_t>(num_classes, 0), 0};
  for (std::size_t c : clients) {
    for (std::size_t i : p.clients.at(c)) {
      ++h.counts.at(static_cast<std::size_t>(labels[i]));
      ++h.total;
    }
  }
  return h;
}

double sample_relative_entropy(const sampling::SamplingPlan& plan, const data::Partition& p,
                               std::span<const int> labels, std::size_t num_classes) {
  const auto sampled = union_histogram(plan.selected, p, labels, num_classes);
  if (sampled.total == 0) throw std::invalid_argument("sample_relative_entropy: empty sample union");
  std::vector<std::size_t> everyone(p.num_clients());
  for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
  const auto global = union_histogram(everyone, p, labels, num_classes);
  return sampling::kl_divergence(sampled.distribution(), global.distribution());
}

LatentGap latent_cluster_gap(std::span<const Matrix> latents,
                             const sampling::ClusterAssignment& assign, std::uint64_t seed,
                             std::size_t permutations) {
  const std::size_t n = latents.size();
  if (n < 2) throw std::invalid_argument("latent_cluster_gap: need at least two clients");
  if (assign.labels.size() != n) {
    throw std::invalid_argument("latent_cluster_gap: assignment size does not match client count");
  }
  const auto sizes = assign.cluster_sizes();
  if (std::none_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s >= 2; })) {
    throw std::invalid_argument("latent_cluster_gap: every cluster is a singleton");
  }
  std::vector<std::vector<double>> means;
  means.reserve(n);
  for (const auto& m : latents) {
    if (m.rows() == 0 || m.cols() != latents.front().cols() || m.rows() != latents.front().rows()) {
      throw std::invalid_argument("latent_cluster_gap: latent matrices differ in shape");
    }
    means.push_back(mean_row(m));
  }

  LatentGap gap;
  gap.intra_mean = mean_intra_distance(means, assign.labels);
  Rng rng(seed);
  std::vector<int> shuffled = assign.labels;
  double acc = 0.0;
  const std::size_t reps = std::max<std::size_t>(permutations, 1);
  for (std::size_t r = 0; r < reps; ++r) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    acc += mean_intra_distance(means, shuffled);
  }
  gap.random_mean = acc / static_cast<double>(reps);
  return gap;
}

CkaResult linear_cka(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("linear_cka: row counts differ");
  if (a.rows() < 2) throw std::invalid_argument("linear_cka: need at least two rows");
  const Matrix at = centred_transpose(a);
  const Matrix bt = centred_transpose(b);
  const double ab = cross_frobenius_sq(at, bt);
  const double aa = std::sqrt(cross_frobenius_sq(at, at));
  const double bb = std::sqrt(cross_frobenius_sq(bt, bt));
  if (!(aa > 0.0) || !(bb > 0.0)) return {0.0, true};
  return {std::clamp(ab / (aa * bb), 0.0, 1.0), false};
}

Matrix cka_layer_map(const nn::ModelParams& a, const nn::ModelParams& b, const Matrix& probe) {
  const auto acts_a = nn::layer_activations(a, probe);
  const auto acts_b = nn::layer_activations(b, probe);
  Matrix grid(acts_a.size(), acts_b.size());
  for (std::size_t i = 0; i < acts_a.size(); ++i) {
    for (std::size_t j = 0; j < acts_b.size(); ++j) grid(i, j) = linear_cka(acts_a[i], acts_b[j]).value;
  }
  return grid;
}

std::string grid_to_csv(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += fmt::format("{}", m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::uint64_t wire_bytes(std::size_t values) noexcept {
  return static_cast<std::uint64_t>(values) * kBytesPerValue;
}

CostRecord comm_cost_step(const CostModel& model, const sampling::SamplingPlan& plan,
                          Algorithm algorithm, bool include_one_time,
                          std::uint64_t previous_cumulative) {
  CostRecord rec;
  rec.round = plan.round;
  const std::uint64_t copies = algorithm == Algorithm::kScaffold ? 2 : 1;
  rec.per_client_down_bytes = copies * model.model_bytes;
  rec.per_client_up_bytes = copies * model.model_bytes;
  rec.one_time_bytes = include_one_time ? model.one_time_bytes() : 0;
  rec.round_bytes = static_cast<std::uint64_t>(plan.selected.size()) *
                        (rec.per_client_down_bytes + rec.per_client_up_bytes) +
                    rec.one_time_bytes;
  rec.cumulative_bytes = previous_cumulative + rec.round_bytes;
  return rec;
}

Evaluation evaluate_global(const nn::ModelParams& params, const data::Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate_global: empty test set");
  const auto out = nn::forward(params, test.features);
  const Matrix& probs = out.soft.probs;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const auto y = static_cast<std::size_t>(test.labels[r]);
    if (best == y) ++correct;
    loss -= std::log(std::max(row[y], nn::kProbabilityFloor));
  }
  const double m = static_cast<double>(probs.rows());
  return {static_cast<double>(correct) / m, loss / m};
}

std::optional<std::size_t> rounds_to_target(std::span<const RoundMetrics> stream, double target) {
  for (const auto& r : stream) {
    if (r.test_accuracy >= target) return r.round;
  }
  return std::nullopt;
}

std::string metrics_to_csv(std::span<const RoundMetrics> stream) {
  std::string out = "round,accuracy,loss,entropy,cumulative_bytes\n";
  for (const auto& r : stream) {
    out += fmt::format("{},{},{},{},{}\n", r.round, r.test_accuracy, r.test_loss,
                       r.sample_relative_entropy, r.cumulative_bytes);
  }
  return out;
}

std::vector<RoundMetrics> metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("round,", 0) != 0) {
    throw std::runtime_error("metrics CSV: missing header");
  }
  std::vector<RoundMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::runtime_error("metrics CSV: expected 5 columns: " + line);
    RoundMetrics r;
    r.round = std::stoull(cells[0]);
    r.test_accuracy = std::stod(cells[1]);
    r.test_loss = std::stod(cells[2]);
    r.sample_relative_entropy = std::stod(cells[3]);
    r.cumulative_bytes = std::stoull(cells[4]);
    out.push_back(r);
  }
  return out;
}

}  // namespace lefl::metrics
