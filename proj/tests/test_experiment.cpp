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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lefl/experiment.hpp"

namespace lefl::experiment {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(testing::TempDir()) / ("lefl_exp_" + name);
  fs::remove_all(dir);
  return dir;
}

nlohmann::json minimal_doc(const fs::path& out) {
  auto doc = nlohmann::json::parse(R"({
    "name": "mini",
    "dataset": {"type": "blobs", "num_classes": 4, "dim": 5, "per_class": 30, "test_per_class": 10},
    "partition": {"type": "iid"},
    "n_clients": 4,
    "model": {"hidden": [6]},
    "sample_ratio": 0.5,
    "rounds": 2,
    "local_epochs": 1,
    "lr": 0.05,
    "seed": 3
  })");
  doc["output_dir"] = out.string();
  return doc;
}

ExperimentConfig minimal(const fs::path& out) { return config_from_json(minimal_doc(out)); }

TEST(RunExperiment, MinimalSmoke) {
  const auto out = scratch("smoke");
  const auto dir = run_experiment(minimal(out));
  EXPECT_EQ(dir, out / "mini");
  const auto csv = slurp(dir / "metrics.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);  // header + 2 rounds
  for (const char* f : {"config.json", "partition.json", "summary.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "clusters.json"));
}

TEST(RunExperiment, ByteIdenticalReruns) {
  const auto out = scratch("rerun");
  auto cfg = minimal(out);
  cfg.rounds = 4;
  cfg.algorithm = Algorithm::kScaffold;
  const auto first = slurp(run_experiment(cfg) / "metrics.csv");
  EXPECT_EQ(first, slurp(run_experiment(cfg) / "metrics.csv"));
  EXPECT_EQ(first, slurp(run_experiment(cfg, 3) / "metrics.csv"));
}

TEST(RunExperiment, LeflArtifacts) {
  const auto out = scratch("lefl");
  auto cfg = minimal(out);
  cfg.sampler = Sampler::kLefl;
  cfg.public_count = 50;
  const auto dir = run_experiment(cfg);
  EXPECT_TRUE(fs::exists(dir / "similarity_matrix.csv"));
  EXPECT_TRUE(fs::exists(dir / "clusters.json"));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["one_time_bytes"].get<std::uint64_t>(), 4u * (50 * 5 * 4 + 50 * 4 * 4));
}

TEST(RunExperiment, EchoedConfigReproducesRun) {
  const auto out = scratch("echo");
  auto cfg = minimal(out);
  cfg.sampler = Sampler::kLefl;
  cfg.public_count = 40;
  const auto dir = run_experiment(cfg);
  const auto original = slurp(dir / "metrics.csv");
  auto echoed = config_from_json(nlohmann::json::parse(slurp(dir / "config.json")));
  echoed.name = "again";
  EXPECT_EQ(original, slurp(run_experiment(echoed) / "metrics.csv"));
}

TEST(RunExperiment, LeflRoundOneCountsEveryClient) {
  auto cfg = minimal(scratch("cost"));
  cfg.sampler = Sampler::kLefl;
  cfg.public_count = 10;
  cfg.rounds = 3;
  const auto r = run_simulation(cfg);
  const std::uint64_t per_client = r.per_client_round_bytes;
  EXPECT_EQ(r.metrics[0].cumulative_bytes, 4 * per_client + r.one_time_bytes);
  EXPECT_EQ(r.metrics[2].cumulative_bytes, (4 + 2 + 2) * per_client + r.one_time_bytes);
  cfg.round1_participation = Round1Participation::kSampled;
  const auto s = run_simulation(cfg);
  // sampled round 1: all clients still download the model for soft labels
  EXPECT_EQ(s.metrics[0].cumulative_bytes, 2 * per_client + 2 * (per_client / 2) + r.one_time_bytes);
}

TEST(Config, RejectsInfeasibleCombinations) {
  auto expect_field = [](nlohmann::json doc, const std::string& field) {
    try {
      config_from_json(doc).validate();
      ADD_FAILURE() << "accepted config, expected error on " << field;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field) << e.what();
    }
  };
  const auto base = minimal_doc(scratch("cfg"));
  auto d = base;
  d["sample_ratio"] = 0.1;  // 0.4 clients
  expect_field(d, "sample_ratio");
  d = base;
  d["partition"] = {{"type", "quantity"}, {"labels_per_client", 1}};
  d["n_clients"] = 3;
  expect_field(d, "partition.labels_per_client");
  d = base;
  d["partition"] = {{"type", "quantity"}, {"labels_per_client", 5}};
  expect_field(d, "partition.labels_per_client");
  d = base;
  d["algorithm"] = "scaffold";
  d["client_state"] = "stateless";
  expect_field(d, "client_state");
  d = base;
  d.erase("seed");
  expect_field(d, "seed");
  d = base;
  d["rounds"] = 0;
  expect_field(d, "rounds");
  d = base;
  d["lr"] = -1;
  expect_field(d, "lr");
  d = base;
  d["algorithm"] = "fedsgd";
  expect_field(d, "algorithm");
  d = base;
  d["sampler"] = "greedy";
  expect_field(d, "sampler");
  d = base;
  d["bogus"] = 1;
  expect_field(d, "bogus");
  d = base;
  d["rounds"] = "ten";
  expect_field(d, "rounds");
  d = base;
  d["partition"] = {{"type", "manual"}, {"groups", {{{"clients", 2}, {"labels", {0, 1}}}, {{"clients", 2}, {"labels", {1, 2}}}}}};
  expect_field(d, "partition.groups");
  d = base;
  d["partition"] = {{"type", "dirichlet"}, {"beta", 0}};
  expect_field(d, "partition.beta");
}

TEST(Config, ManualGroupsDefineClientCount) {
  auto d = minimal_doc(scratch("manual"));
  d.erase("n_clients");
  d["partition"] = {{"type", "manual"}, {"groups", {{{"clients", 3}, {"labels", {0, 1}}}, {{"clients", 2}, {"labels", {2, 3}}}}}};
  const auto cfg = config_from_json(d);
  EXPECT_EQ(cfg.n_clients, 5u);
  cfg.validate();
}

TEST(Config, JsonRoundTrip) {
  auto cfg = minimal(scratch("rt"));
  cfg.target_accuracy = 0.8;
  cfg.eq1_denominator = fl::Eq1Denominator::kGlobal;
  const auto j = nlohmann::json::parse(config_to_json(cfg).dump());
  EXPECT_EQ(config_to_json(config_from_json(j)).dump(), config_to_json(cfg).dump());
}

TEST(Config, Overrides) {
  auto doc = minimal_doc(scratch("ovr"));
  apply_override(doc, "partition.type=dirichlet");
  apply_override(doc, "partition.beta=0.1");
  apply_override(doc, "model.hidden=[8,4]");
  apply_override(doc, "name=renamed");
  const auto cfg = config_from_json(doc);
  EXPECT_EQ(cfg.partition.type, "dirichlet");
  EXPECT_DOUBLE_EQ(cfg.partition.beta, 0.1);
  EXPECT_EQ(cfg.hidden, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(cfg.name, "renamed");
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
}

TEST(CompareRuns, DeltasAndUnreachedTargets) {
  const auto out = scratch("cmp");
  auto a = minimal(out);
  a.rounds = 3;
  a.lr = 1e-6;  // stays near chance, so 0.9 is never reached
  auto b = a;
  b.name = "lefl";
  b.sampler = Sampler::kLefl;
  b.public_count = 20;
  const auto da = run_experiment(a), db = run_experiment(b);
  const std::vector<fs::path> dirs = {da, db};

  const auto easy = compare_runs(dirs, 0.01);
  EXPECT_EQ(easy["runs"][0]["rounds_to_target"], 1);
  EXPECT_EQ(easy["runs"][0]["delta_bytes"], 0);
  const auto ra = run_simulation(a), rb = run_simulation(b);
  const auto expect_delta = static_cast<std::int64_t>(rb.metrics[0].cumulative_bytes) -
                            static_cast<std::int64_t>(ra.metrics[0].cumulative_bytes);
  EXPECT_EQ(easy["runs"][1]["delta_bytes"].get<std::int64_t>(), expect_delta);
  EXPECT_EQ(easy["runs"][1]["delta_recurring_bytes"].get<std::int64_t>(),
            expect_delta - static_cast<std::int64_t>(rb.one_time_bytes));

  const auto hard = compare_runs(dirs, 0.9);
  EXPECT_EQ(hard["runs"][0]["rounds_label"], ">3");
  EXPECT_FALSE(hard["runs"][1]["reached"].get<bool>());

  const std::vector<fs::path> one = {da};
  EXPECT_THROW(compare_runs(one, 0.5), std::invalid_argument);
  const std::vector<fs::path> missing = {da, out / "nope"};
  EXPECT_THROW(compare_runs(missing, 0.5), std::runtime_error);
}

}  // namespace
}  // namespace lefl::experiment
