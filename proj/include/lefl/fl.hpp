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

// Federated rounds: local training on each sampled client, then server-side
// aggregation with FedAvg, FedProx, SCAFFOLD or FedNova.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lefl/data.hpp"
#include "lefl/metrics.hpp"
#include "lefl/nn.hpp"
#include "lefl/sampling.hpp"
#include "lefl/types.hpp"

namespace lefl::fl {

struct ClientState {
  std::size_t id = 0;
  std::vector<std::size_t> data;  // indices into the training set
  std::optional<std::vector<double>> control_variate;  // SCAFFOLD c_i
  std::size_t local_steps_taken = 0;
};

struct ServerState {
  nn::ModelParams global;
  std::optional<std::vector<double>> server_control;  // SCAFFOLD c
  std::size_t round = 0;  // rounds completed
  std::uint64_t rng_seed = 0;
};

struct LocalUpdate {
  std::size_t client_id = 0;
  nn::ModelParams new_params;
  std::optional<std::vector<double>> delta_control;  // c_i+ - c_i
  std::optional<std::vector<double>> next_control;   // c_i+, kept by the client
  std::size_t num_samples = 0;
  std::size_t local_steps = 0;
};

struct LocalTrainResult {
  LocalUpdate update;
  // Set when training produced non-finite values; the update must be dropped.
  std::optional<std::string> divergence;
};

// Observes every training sample a client reads: (client id, sample index).
using AccessHook = std::function<void(std::size_t, std::size_t)>;

struct LocalTrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 10;
  nn::LearningRate lr;
  Algorithm algorithm = Algorithm::kFedAvg;
  double prox_mu = 0.0;

  void validate() const;
};

// Seed of client `client_id`'s shuffling stream in round `round`.
std::uint64_t local_seed(std::uint64_t master_seed, std::size_t round, std::size_t client_id);

// Starts from `global` and runs cfg.epochs epochs of shuffled mini-batch SGD
// over the client's own samples. `round` is the 1-based round being played.
// Throws std::invalid_argument on bad configuration or when SCAFFOLD runs
// without `server_control`.
LocalTrainResult local_train(const ClientState& client, const data::Dataset& train,
                             const nn::ModelParams& global, const LocalTrainConfig& cfg,
                             const std::vector<double>* server_control, std::uint64_t master_seed,
                             std::size_t round, const AccessHook* hook = nullptr);

enum class Eq1Denominator {
  kSampledSum,  // weights |D_i| / sum over sampled clients
  kGlobal,      // weights |D_i| / |D|
};

// Weighted mean of the updates' parameters, summed in client-id order.
// `global_samples` is only read under Eq1Denominator::kGlobal.
nn::ModelParams aggregate_fedavg(std::span<const LocalUpdate> updates,
                                 Eq1Denominator denominator = Eq1Denominator::kSampledSum,
                                 std::size_t global_samples = 0);

struct ScaffoldAggregate {
  nn::ModelParams params;
  std::vector<double> server_control;
};

// Parameters as FedAvg; c <- c + (|s| / N) * mean(delta_control).
ScaffoldAggregate aggregate_scaffold(const ServerState& server, std::span<const LocalUpdate> updates,
                                     std::size_t total_clients,
                                     Eq1Denominator denominator = Eq1Denominator::kSampledSum,
                                     std::size_t global_samples = 0);

// Normalized averaging: d_i = (global - w_i) / tau_i,
// tau_eff = sum p_i tau_i, result = global - tau_eff * sum p_i d_i.
nn::ModelParams aggregate_fednova(const nn::ModelParams& global, std::span<const LocalUpdate> updates);

struct FlConfig {
  LocalTrainConfig local;
  Eq1Denominator eq1_denominator = Eq1Denominator::kSampledSum;
  std::size_t workers = 1;
};

// Everything a round reads besides server and client state.
struct RoundEnv {
  const data::Dataset* train = nullptr;
  const data::Dataset* test = nullptr;
  const data::Partition* partition = nullptr;
  metrics::CostModel cost;
  std::uint64_t previous_cumulative_bytes = 0;
  const AccessHook* hook = nullptr;
};

struct RoundResult {
  ServerState server;
  metrics::RoundMetrics metrics;
  metrics::CostRecord cost;
  // Clients whose updates were excluded, with the reason.
  std::vector<std::pair<std::size_t, std::string>> dropped;
};

// Runs local_train for every selected client, in parallel up to cfg.workers,
// all from the same global snapshot.
std::vector<LocalTrainResult> train_clients(const ServerState& server,
                                            std::span<const ClientState> clients,
                                            std::span<const std::size_t> selected,
                                            const RoundEnv& env, const FlConfig& cfg,
                                            std::size_t round);

// Aggregates already-trained results for `plan`, stores SCAFFOLD client
// variates, advances the round counter and records metrics.
RoundResult finish_round(const ServerState& server, std::span<ClientState> clients,
                         const sampling::SamplingPlan& plan,
                         std::vector<LocalTrainResult> results, const RoundEnv& env,
                         const FlConfig& cfg, bool include_one_time_cost = false);

RoundResult run_round(const ServerState& server, std::span<ClientState> clients,
                      const sampling::SamplingPlan& plan, const RoundEnv& env,
                      const FlConfig& cfg);

// Calls fn(i) for i in [0, count) on up to `workers` threads. The first
// exception thrown (by index order) is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace lefl::fl
