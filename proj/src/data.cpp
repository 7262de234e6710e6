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

#include "lefl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lefl/rng.hpp"

namespace lefl::data {
namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  return by_class;
}

// Splits `total` into counts proportional to `weights` (which sum to 1) so
// that the counts sum to `total` exactly. Leftover units go to the largest
// fractional parts, lower index first on ties.
std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rema;
  rema.reserve(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    const double fl = std::floor(exact);
    counts[i] = static_cast<std::size_t>(fl);
    assigned += counts[i];
    rema.emplace_back(exact - fl, i);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[rema[r % rema.size()].second];
  // Rounding error can overshoot in pathological cases; trim from the back.
  for (std::size_t i = counts.size(); assigned > total && i-- > 0;) {
    while (counts[i] > 0 && assigned > total) {
      --counts[i];
      --assigned;
    }
  }
  return counts;
}

// Deals `items` to `holders` in near-equal contiguous chunks (first ones get
// the extra sample).
void split_evenly(std::span<const std::size_t> items, std::span<const std::size_t> holders,
                  Partition& out) {
  const std::size_t h = holders.size();
  const std::size_t base = items.size() / h;
  const std::size_t extra = items.size() % h;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < h; ++j) {
    const std::size_t take = base + (j < extra ? 1 : 0);
    auto& dst = out.clients[holders[j]];
    dst.insert(dst.end(), items.begin() + pos, items.begin() + pos + take);
    pos += take;
  }
}

void sort_clients(Partition& p) {
  for (auto& c : p.clients) std::sort(c.begin(), c.end());
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (features.rows() != labels.size()) {
    throw std::invalid_argument("dataset feature rows do not match label count");
  }
  if (num_classes < 2) throw std::invalid_argument("dataset needs at least two classes");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::invalid_argument("dataset label out of range: " + std::to_string(y));
    }
  }
}

std::size_t Partition::total_samples() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.size();
  return n;
}

Dataset synth_blobs(std::size_t num_classes, std::size_t dim, std::size_t per_class, double spread,
                    std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("synth_blobs: need at least two classes");
  if (dim == 0) throw std::invalid_argument("synth_blobs: dim must be >= 1");
  if (per_class == 0) throw std::invalid_argument("synth_blobs: per_class must be >= 1");
  if (!(spread >= 0.0) || !std::isfinite(spread)) {
    throw std::invalid_argument("synth_blobs: spread must be finite and >= 0");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix means(num_classes, dim);
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto m = means.row(k);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : m) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : m) v /= norm;
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.features = Matrix(num_classes * per_class, dim);
  ds.labels.resize(num_classes * per_class);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t r = k * per_class + i;
      auto x = ds.features.row(r);
      for (std::size_t c = 0; c < dim; ++c) x[c] = means(k, c) + spread * normal(rng);
      ds.labels[r] = static_cast<int>(k);
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, std::size_t per_class_test) {
  ds.validate();
  const auto by_class = indices_by_class(ds);
  std::vector<std::size_t> train_idx, test_idx;
  for (const auto& idx : by_class) {
    if (idx.size() <= per_class_test) {
      throw std::invalid_argument("split_holdout: a class has too few samples for the holdout");
    }
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_class_test));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(per_class_test), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  auto take = [&](const std::vector<std::size_t>& idx) {
    Dataset out;
    out.num_classes = ds.num_classes;
    out.features = ds.features.gather_rows(idx);
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) out.labels.push_back(ds.labels[i]);
    return out;
  };
  return {take(train_idx), take(test_idx)};
}

PublicDataset synth_public(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim == 0 || count == 0) throw std::invalid_argument("synth_public: dim and count must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(kPublicLow, kPublicHigh);
  PublicDataset out{Matrix(count, dim)};
  for (double& v : out.features.values()) v = dist(rng);
  return out;
}

Partition partition_dirichlet(const Dataset& ds, std::size_t num_clients, double beta,
                              std::uint64_t seed) {
  ds.validate();
  if (num_clients == 0) throw std::invalid_argument("partition_dirichlet: need at least one client");
  if (num_clients > ds.size()) {
    throw std::invalid_argument("partition_dirichlet: more clients than samples");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("partition_dirichlet: beta must be > 0");
  }
  auto by_class = indices_by_class(ds);
  for (const auto& idx : by_class) {
    if (idx.empty()) throw std::invalid_argument("partition_dirichlet: a class has no samples");
  }

  Rng rng(seed);
  std::gamma_distribution<double> gamma(beta, 1.0);
  Partition p;
  p.clients.resize(num_clients);
  std::vector<double> props(num_clients);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double sum = 0.0;
    for (double& v : props) {
      v = gamma(rng);
      sum += v;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      // Every draw underflowed: the limit of Dir(beta -> 0) is a point mass.
      std::fill(props.begin(), props.end(), 0.0);
      props[std::uniform_int_distribution<std::size_t>(0, num_clients - 1)(rng)] = 1.0;
    } else {
      for (double& v : props) v /= sum;
    }
    const auto counts = largest_remainder(props, idx.size());
    std::size_t pos = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      auto& dst = p.clients[c];
      dst.insert(dst.end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                 idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[c]));
      pos += counts[c];
    }
  }

  for (auto& client : p.clients) {
    if (!client.empty()) continue;
    auto largest = std::max_element(p.clients.begin(), p.clients.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    client.push_back(largest->back());
    largest->pop_back();
  }
  sort_clients(p);
  return p;
}

Partition partition_iid(const Dataset& ds, std::size_t num_clients, std::uint64_t seed) {
  ds.validate();
  if (num_clients == 0 || num_clients > ds.size()) {
    throw std::invalid_argument("partition_iid: client count must be in [1, dataset size]");
  }
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> holders(num_clients);
  std::iota(holders.begin(), holders.end(), 0);
  Partition p;
  p.clients.resize(num_clients);
  split_evenly(idx, holders, p);
  sort_clients(p);
  return p;
}

std::vector<std::vector<int>> quantity_label_sets(std::size_t num_classes, std::size_t num_clients,
                                                  std::size_t labels_per_client,
                                                  std::uint64_t seed) {
  if (labels_per_client < 1 || labels_per_client > num_classes) {
    throw std::invalid_argument("partition_quantity: labels per client must be in [1, K]");
  }
  if (num_clients == 0 || num_clients * labels_per_client < num_classes) {
    throw std::invalid_argument(
        "partition_quantity: infeasible, clients * labels_per_client < number of classes");
  }
  Rng rng(seed);
  std::vector<int> perm(num_classes);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<int>> sets(num_clients);
  for (std::size_t j = 0; j < num_classes; ++j) sets[j % num_clients].push_back(perm[j]);

  std::vector<int> pool;
  for (auto& s : sets) {
    pool.clear();
    for (int k = 0; k < static_cast<int>(num_classes); ++k) {
      if (std::find(s.begin(), s.end(), k) == s.end()) pool.push_back(k);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t need = labels_per_client - s.size();
    s.insert(s.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
    std::sort(s.begin(), s.end());
  }
  return sets;
}

Partition partition_quantity(const Dataset& ds, std::size_t num_clients,
                             std::size_t labels_per_client, std::uint64_t seed) {
  ds.validate();
  const auto sets = quantity_label_sets(ds.num_classes, num_clients, labels_per_client, seed);
  std::vector<std::vector<std::size_t>> holders(ds.num_classes);
  for (std::size_t c = 0; c < sets.size(); ++c) {
    for (int k : sets[c]) holders[static_cast<std::size_t>(k)].push_back(c);
  }
  auto by_class = indices_by_class(ds);
  Rng rng(derive_seed(seed, {stream_id("quantity-split")}));
  Partition p;
  p.clients.resize(num_clients);
  for (std::size_t k = 0; k < ds.num_classes; ++k) {
    if (by_class[k].size() < holders[k].size()) {
      throw std::invalid_argument("partition_quantity: label " + std::to_string(k) + " has " +
                                  std::to_string(by_class[k].size()) + " samples but " +
                                  std::to_string(holders[k].size()) + " holders");
    }
    std::shuffle(by_class[k].begin(), by_class[k].end(), rng);
    split_evenly(by_class[k], holders[k], p);
  }
  sort_clients(p);
  return p;
}

Partition partition_manual(const Dataset& ds, std::span<const ManualGroup> groups) {
  ds.validate();
  if (groups.empty()) throw std::invalid_argument("partition_manual: no groups");
  std::set<int> seen;
  std::size_t total_clients = 0;
  for (const auto& g : groups) {
    if (g.client_count == 0 || g.labels.empty()) {
      throw std::invalid_argument("partition_manual: empty group");
    }
    for (int k : g.labels) {
      if (k < 0 || static_cast<std::size_t>(k) >= ds.num_classes) {
        throw std::invalid_argument("partition_manual: label out of range: " + std::to_string(k));
      }
      if (!seen.insert(k).second) {
        throw std::invalid_argument("partition_manual: label " + std::to_string(k) +
                                    " assigned more than once");
      }
    }
    total_clients += g.client_count;
  }
  const auto by_class = indices_by_class(ds);
  Partition p;
  p.clients.resize(total_clients);
  std::size_t first = 0;
  for (const auto& g : groups) {
    std::vector<std::size_t> holders(g.client_count);
    std::iota(holders.begin(), holders.end(), first);
    for (int k : g.labels) split_evenly(by_class[static_cast<std::size_t>(k)], holders, p);
    first += g.client_count;
  }
  for (std::size_t c = 0; c < p.clients.size(); ++c) {
    if (p.clients[c].empty()) {
      throw std::invalid_argument("partition_manual: client " + std::to_string(c) +
                                  " received no samples");
    }
  }
  sort_clients(p);
  return p;
}

void check_partition(const Partition& p, std::size_t dataset_size) {
  std::vector<char> used(dataset_size, 0);
  for (std::size_t c = 0; c < p.clients.size(); ++c) {
    if (p.clients[c].empty()) throw std::logic_error("client " + std::to_string(c) + " is empty");
    for (std::size_t i : p.clients[c]) {
      if (i >= dataset_size) throw std::logic_error("sample index out of range");
      if (used[i]) throw std::logic_error("sample " + std::to_string(i) + " owned twice");
      used[i] = 1;
    }
  }
}

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset CSV: " + path.string());
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": need at least one feature and a label");
    }
    if (dim == 0) dim = cells.size() - 1;
    if (cells.size() - 1 != dim) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": inconsistent column count");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": bad number '" + cells[c] + "'");
      }
      values.push_back(v);
    }
    char* end = nullptr;
    const long y = std::strtol(cells.back().c_str(), &end, 10);
    if (end == cells.back().c_str() || y < 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad label '" +
                               cells.back() + "'");
    }
    labels.push_back(static_cast<int>(y));
  }
  if (labels.empty()) throw std::runtime_error("dataset CSV is empty: " + path.string());
  Dataset ds;
  ds.features = Matrix(labels.size(), dim, std::move(values));
  ds.num_classes = num_classes != 0
                       ? num_classes
                       : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

std::string partition_to_json(const Partition& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < p.clients.size(); ++c) j[std::to_string(c)] = p.clients[c];
  return j.dump();
}

}  // namespace lefl::data
