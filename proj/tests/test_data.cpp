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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "lefl/data.hpp"

namespace lefl::data {
namespace {

std::set<int> labels_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::set<int> out;
  for (auto i : idx) out.insert(ds.labels[i]);
  return out;
}

std::vector<std::size_t> class_counts(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> c(ds.num_classes, 0);
  for (auto i : idx) ++c[static_cast<std::size_t>(ds.labels[i])];
  return c;
}

void expect_disjoint_cover(const Partition& p, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& c : p.clients) {
    for (auto i : c) ++seen.at(i);
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], 1) << "sample " << i;
}

TEST(SynthBlobs, ShapeAndLabels) {
  const auto ds = synth_blobs(2, 2, 5, 0.3, 3);
  EXPECT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.dim(), 2u);
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 0), 5);
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 1), 5);
}

TEST(SynthBlobs, Deterministic) {
  const auto a = synth_blobs(3, 4, 7, 0.5, 11), b = synth_blobs(3, 4, 7, 0.5, 11);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.features, synth_blobs(3, 4, 7, 0.5, 12).features);
}

TEST(SynthBlobs, ZeroSpreadCollapsesToMeans) {
  const auto ds = synth_blobs(3, 5, 4, 0.0, 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t first = static_cast<std::size_t>(ds.labels[i]) * 4;
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(ds.features(i, c), ds.features(first, c));
  }
}

TEST(SplitHoldout, TakesFirstPerClass) {
  const auto ds = synth_blobs(3, 2, 10, 0.2, 1);
  const auto [train, test] = split_holdout(ds, 3);
  EXPECT_EQ(train.size(), 21u);
  EXPECT_EQ(test.size(), 9u);
  EXPECT_EQ(class_counts(test, {0, 1, 2, 3, 4, 5, 6, 7, 8}), (std::vector<std::size_t>{3, 3, 3}));
  EXPECT_THROW(split_holdout(ds, 10), std::invalid_argument);
}

TEST(SynthPublic, ShapeRangeDeterminism) {
  const auto p = synth_public(2, 1000, 1);
  EXPECT_EQ(p.features.rows(), 1000u);
  EXPECT_EQ(p.features.cols(), 2u);
  for (double v : p.features.values()) {
    EXPECT_GE(v, kPublicLow);
    EXPECT_LE(v, kPublicHigh);
  }
  EXPECT_EQ(p.features, synth_public(2, 1000, 1).features);
  EXPECT_EQ(synth_public(3, 1, 5).size(), 1u);
}

TEST(PartitionDirichlet, LargeBetaIsNearlyBalanced) {
  const auto ds = synth_blobs(4, 2, 100, 0.2, 1);
  const auto p = partition_dirichlet(ds, 10, 1e6, 5);
  expect_disjoint_cover(p, ds.size());
  for (const auto& c : p.clients) {
    for (auto n : class_counts(ds, c)) {
      EXPECT_LE(n, 12u);
      EXPECT_GE(n, 8u);
    }
  }
}

TEST(PartitionDirichlet, ConservesEveryClass) {
  const auto ds = synth_blobs(10, 2, 50, 0.2, 1);
  const auto p = partition_dirichlet(ds, 100, 0.5, 9);
  check_partition(p, ds.size());
  expect_disjoint_cover(p, ds.size());
  std::vector<std::size_t> totals(10, 0);
  for (const auto& c : p.clients) {
    EXPECT_FALSE(c.empty());
    const auto cc = class_counts(ds, c);
    for (std::size_t k = 0; k < 10; ++k) totals[k] += cc[k];
  }
  for (auto t : totals) EXPECT_EQ(t, 50u);
}

TEST(PartitionDirichlet, SingleClientOwnsAll) {
  const auto ds = synth_blobs(3, 2, 5, 0.2, 1);
  const auto p = partition_dirichlet(ds, 1, 0.5, 1);
  ASSERT_EQ(p.num_clients(), 1u);
  EXPECT_EQ(p.clients[0].size(), ds.size());
}

TEST(PartitionDirichlet, Deterministic) {
  const auto ds = synth_blobs(5, 2, 40, 0.2, 1);
  EXPECT_EQ(partition_dirichlet(ds, 20, 0.3, 4).clients, partition_dirichlet(ds, 20, 0.3, 4).clients);
  EXPECT_THROW(partition_dirichlet(ds, 20, 0.0, 4), std::invalid_argument);
}

TEST(PartitionQuantity, ExactLabelCount) {
  const auto ds = synth_blobs(62, 2, 20, 0.2, 1);
  const auto p = partition_quantity(ds, 20, 15, 3);
  check_partition(p, ds.size());
  expect_disjoint_cover(p, ds.size());
  for (const auto& c : p.clients) EXPECT_EQ(labels_of(ds, c).size(), 15u);
}

TEST(PartitionQuantity, AllLabelsPerClient) {
  const auto ds = synth_blobs(4, 2, 20, 0.2, 1);
  const auto p = partition_quantity(ds, 5, 4, 3);
  std::set<int> all;
  for (const auto& c : p.clients) {
    const auto s = labels_of(ds, c);
    EXPECT_EQ(s.size(), 4u);
    all.insert(s.begin(), s.end());
  }
  EXPECT_EQ(all.size(), 4u);
}

TEST(PartitionQuantity, Label2CoversEveryLabel) {
  const auto ds = synth_blobs(10, 2, 200, 0.2, 1);
  const auto p = partition_quantity(ds, 100, 2, 17);
  expect_disjoint_cover(p, ds.size());
  for (const auto& c : p.clients) EXPECT_EQ(labels_of(ds, c).size(), 2u);
  EXPECT_EQ(p.clients, partition_quantity(ds, 100, 2, 17).clients);
}

TEST(PartitionQuantity, Infeasible) {
  const auto ds = synth_blobs(10, 2, 20, 0.2, 1);
  EXPECT_THROW(partition_quantity(ds, 4, 2, 1), std::invalid_argument);
  EXPECT_THROW(partition_quantity(ds, 4, 11, 1), std::invalid_argument);
  EXPECT_THROW(partition_quantity(ds, 4, 0, 1), std::invalid_argument);
}

TEST(PartitionManual, AblationLayout) {
  const auto ds = synth_blobs(10, 2, 50, 0.2, 1);
  const std::vector<ManualGroup> groups = {
      {5, {0, 1}}, {5, {2, 3}}, {5, {4, 5}}, {5, {6, 7}}, {4, {8, 9}}};
  const auto p = partition_manual(ds, groups);
  ASSERT_EQ(p.num_clients(), 24u);
  check_partition(p, ds.size());
  expect_disjoint_cover(p, ds.size());
  for (std::size_t i = 0; i < 24; ++i) {
    const auto s = labels_of(ds, p.clients[i]);
    const int g = static_cast<int>(std::min<std::size_t>(i / 5, 4));
    EXPECT_EQ(s, (std::set<int>{2 * g, 2 * g + 1})) << "client " << i;
  }
}

TEST(PartitionManual, SingleClientAllLabels) {
  const auto ds = synth_blobs(3, 2, 5, 0.2, 1);
  const std::vector<ManualGroup> groups = {{1, {0, 1, 2}}};
  const auto p = partition_manual(ds, groups);
  ASSERT_EQ(p.num_clients(), 1u);
  EXPECT_EQ(p.clients[0].size(), 15u);
}

TEST(PartitionManual, RejectsDuplicatesAndEmpties) {
  const auto ds = synth_blobs(4, 2, 5, 0.2, 1);
  EXPECT_THROW(partition_manual(ds, std::vector<ManualGroup>{{2, {0, 1}}, {2, {1, 2}}}), std::invalid_argument);
  EXPECT_THROW(partition_manual(ds, std::vector<ManualGroup>{{0, {0}}}), std::invalid_argument);
  EXPECT_THROW(partition_manual(ds, std::vector<ManualGroup>{{6, {0}}}), std::invalid_argument);
}

TEST(PartitionIid, EqualShards) {
  const auto ds = synth_blobs(4, 2, 25, 0.2, 1);
  const auto p = partition_iid(ds, 7, 2);
  expect_disjoint_cover(p, ds.size());
  for (const auto& c : p.clients) {
    EXPECT_GE(c.size(), 14u);
    EXPECT_LE(c.size(), 15u);
  }
}

TEST(CheckPartition, NamesViolations) {
  Partition p{{{0, 1}, {1, 2}}};
  EXPECT_THROW(check_partition(p, 3), std::logic_error);
  Partition q{{{0, 1}, {}}};
  EXPECT_THROW(check_partition(q, 2), std::logic_error);
  Partition r{{{0, 5}}};
  EXPECT_THROW(check_partition(r, 2), std::logic_error);
}

TEST(LoadCsv, RoundTrip) {
  const auto path = std::filesystem::path(testing::TempDir()) / "lefl_load.csv";
  {
    std::ofstream out(path);
    out << "0.5,1.0,0\n-1,2.5,2\n3,4,1\n";
  }
  const auto ds = load_csv(path);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.dim(), 2u);
  EXPECT_EQ(ds.num_classes, 3u);
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 2, 1}));
  EXPECT_EQ(ds.features(1, 1), 2.5);
  EXPECT_EQ(load_csv(path, 5).num_classes, 5u);
  {
    std::ofstream out(path);
    out << "0.5,1.0,0\n1,2\n";
  }
  EXPECT_THROW(load_csv(path), std::exception);
  EXPECT_THROW(load_csv(path.string() + ".missing"), std::exception);
}

TEST(PartitionJson, ListsClients) {
  Partition p{{{0, 2}, {1}}};
  EXPECT_EQ(partition_to_json(p), R"({"0":[0,2],"1":[1]})");
}

}  // namespace
}  // namespace lefl::data
