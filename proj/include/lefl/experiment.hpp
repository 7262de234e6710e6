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

// JSON-configured experiment runner: builds data, partition and clients,
// plays the rounds and writes the run directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lefl/data.hpp"
#include "lefl/fl.hpp"
#include "lefl/metrics.hpp"
#include "lefl/sampling.hpp"

namespace lefl::experiment {

// A validation failure tied to one configuration field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct DatasetConfig {
  std::string type = "blobs";  // blobs | csv
  std::size_t num_classes = 10;
  std::size_t dim = 16;
  std::size_t per_class = 500;
  std::size_t test_per_class = 100;
  double spread = 0.25;
  std::string train_path;
  std::string test_path;  // optional for csv; train data is reused when empty
};

struct PartitionConfig {
  std::string type = "quantity";  // dirichlet | quantity | manual | iid
  double beta = 0.5;
  std::size_t labels_per_client = 2;
  std::vector<data::ManualGroup> groups;
};

enum class Sampler { kUniform, kLefl };
enum class Round1Participation { kAll, kSampled };
enum class ClientStateMode { kPersistent, kStateless };

struct ExperimentConfig {
  std::string name = "run";
  std::string output_dir = "runs";
  DatasetConfig dataset;
  PartitionConfig partition;
  std::size_t n_clients = 100;
  std::vector<std::size_t> hidden = {32};
  Algorithm algorithm = Algorithm::kFedAvg;
  Sampler sampler = Sampler::kUniform;
  double sample_ratio = 0.1;
  std::size_t rounds = 10;
  std::size_t local_epochs = 10;
  double lr = 0.01;
  double decay = 0.99;
  double prox_mu = 0.0;
  std::size_t batch_size = 10;
  std::size_t cluster_k = 0;  // 0: default_cluster_count(n_clients)
  std::size_t public_count = 1000;
  std::optional<std::uint64_t> seed;
  fl::Eq1Denominator eq1_denominator = fl::Eq1Denominator::kSampledSum;
  Round1Participation round1_participation = Round1Participation::kAll;
  sampling::SoftLabelReduction soft_label_reduction = sampling::SoftLabelReduction::kPerSampleMean;
  ClientStateMode client_state = ClientStateMode::kPersistent;
  std::optional<double> target_accuracy;
  std::string baseline_run;  // run directory to report byte deltas against

  // Throws ConfigError naming the first offending field.
  void validate() const;
  // Clients selected per round: round(sample_ratio * n_clients).
  std::size_t budget() const;
  nn::ModelSpec model_spec() const;
};

// Throws ConfigError on unknown keys or wrongly typed values.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

// Applies "a.b.c=value" to a JSON document; `value` is parsed as JSON and
// falls back to a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct SimulationResult {
  ExperimentConfig config;
  data::Dataset train;
  data::Dataset test;
  data::Partition partition;
  std::vector<metrics::RoundMetrics> metrics;
  fl::ServerState final_server;
  std::uint64_t per_client_round_bytes = 0;
  std::uint64_t one_time_bytes = 0;
  std::size_t dropped_updates = 0;
  // Present for the lefl sampler.
  std::optional<sampling::SimilarityMatrix> similarity;
  std::optional<sampling::ClusterAssignment> clusters;
  std::vector<Matrix> probe_latents;
};

// Runs the whole simulation in memory. `workers` caps parallel client
// training and never changes the results.
SimulationResult run_simulation(const ExperimentConfig& cfg, std::size_t workers = 1);

nlohmann::ordered_json summary_json(const SimulationResult& result);

// Writes <output_dir>/<name>/{config.json, metrics.csv, partition.json,
// summary.json} plus similarity_matrix.csv and clusters.json for lefl runs.
// Returns the run directory.
std::filesystem::path write_artifacts(const SimulationResult& result);

std::filesystem::path run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1);

// Rounds to target, bytes to target and byte deltas against dirs[0].
// Throws std::invalid_argument for fewer than two directories and
// std::runtime_error for missing run files.
nlohmann::ordered_json compare_runs(std::span<const std::filesystem::path> dirs, double target_accuracy);

}  // namespace lefl::experiment
