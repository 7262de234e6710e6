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

#include "lefl/fl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "lefl/kernels.hpp"
#include "lefl/rng.hpp"

namespace lefl::fl {
namespace {

std::vector<const LocalUpdate*> sorted_by_client(std::span<const LocalUpdate> updates) {
  std::vector<const LocalUpdate*> out;
  out.reserve(updates.size());
  for (const auto& u : updates) out.push_back(&u);
  std::sort(out.begin(), out.end(),
            [](const LocalUpdate* a, const LocalUpdate* b) { return a->client_id < b->client_id; });
  return out;
}

void check_updates(std::span<const LocalUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregation needs at least one update");
  const auto& spec = updates.front().new_params.spec;
  for (const auto& u : updates) {
    if (u.new_params.spec != spec || u.new_params.size() != spec.num_params()) {
      throw std::invalid_argument("aggregation: updates disagree on model shape");
    }
  }
}

// Sum of w_i * vec(u_i) in client-id order.
nn::ModelParams weighted_sum(const std::vector<const LocalUpdate*>& sorted,
                             const std::vector<std::vector<double>>* replaced,
                             std::span<const double> weights) {
  nn::ModelParams out = nn::zero_params(sorted.front()->new_params.spec);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const std::vector<double>& v = replaced ? (*replaced)[i] : sorted[i]->new_params.values;
    kernels::axpy(weights[i], v, out.values);
  }
  return out;
}

std::vector<double> size_weights(const std::vector<const LocalUpdate*>& sorted,
                                 Eq1Denominator denominator, std::size_t global_samples) {
  std::size_t total = 0;
  for (const auto* u : sorted) total += u->num_samples;
  if (denominator == Eq1Denominator::kGlobal) {
    if (global_samples < total) {
      throw std::invalid_argument("aggregation: global sample count smaller than sampled total");
    }
    total = global_samples;
  }
  if (total == 0) throw std::invalid_argument("aggregation: updates carry no samples");
  std::vector<double> w;
  w.reserve(sorted.size());
  for (const auto* u : sorted) {
    w.push_back(static_cast<double>(u->num_samples) / static_cast<double>(total));
  }
  return w;
}

}  // namespace

void LocalTrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("local epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  lr.validate();
  if (!(prox_mu >= 0.0) || !std::isfinite(prox_mu)) {
    throw std::invalid_argument("prox_mu must be finite and >= 0");
  }
}

std::uint64_t local_seed(std::uint64_t master_seed, std::size_t round, std::size_t client_id) {
  return derive_seed(master_seed, {stream_id("local"), static_cast<std::uint64_t>(round),
                                   static_cast<std::uint64_t>(client_id)});
}

LocalTrainResult local_train(const ClientState& client, const data::Dataset& train,
                             const nn::ModelParams& global, const LocalTrainConfig& cfg,
                             const std::vector<double>* server_control, std::uint64_t master_seed,
                             std::size_t round, const AccessHook* hook) {
  cfg.validate();
  if (client.data.empty()) {
    throw std::invalid_argument(fmt::format("client {} has no data", client.id));
  }
  const bool scaffold = cfg.algorithm == Algorithm::kScaffold;
  const std::size_t P = global.size();
  std::vector<double> zero_control;
  const std::vector<double>* ci = nullptr;
  if (scaffold) {
    if (server_control == nullptr) {
      throw std::invalid_argument("scaffold local training requires the server control variate");
    }
    if (server_control->size() != P) throw std::invalid_argument("server control length mismatch");
    if (client.control_variate) {
      if (client.control_variate->size() != P) {
        throw std::invalid_argument("client control length mismatch");
      }
      ci = &*client.control_variate;
    } else {
      zero_control.assign(P, 0.0);
      ci = &zero_control;
    }
  }
  const double mu = cfg.algorithm == Algorithm::kFedProx ? cfg.prox_mu : 0.0;

  LocalTrainResult result;
  LocalUpdate& up = result.update;
  up.client_id = client.id;
  up.num_samples = client.data.size();
  up.new_params = global;
  std::span<double> w(up.new_params.values);

  Rng rng(local_seed(master_seed, round, client.id));
  std::vector<std::size_t> order(client.data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> batch_idx;
  std::vector<int> batch_labels;
  std::size_t steps = 0;

  for (std::size_t e = 0; e < cfg.epochs && !result.divergence; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.lr.at_epoch(e);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_idx.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t sample = client.data[order[k]];
        if (hook && *hook) (*hook)(client.id, sample);
        batch_idx.push_back(sample);
        batch_labels.push_back(train.labels[sample]);
      }
      const Matrix batch = train.features.gather_rows(batch_idx);
      auto lg = nn::loss_and_grad(up.new_params, batch, batch_labels, mu, &global);
      if (scaffold) {
        for (std::size_t i = 0; i < P; ++i) lg.grad[i] += (*server_control)[i] - (*ci)[i];
      }
      if (!all_finite(lg.grad)) {
        result.divergence = fmt::format("non-finite gradient at epoch {} step {}", e, steps);
        break;
      }
      kernels::axpy(-lr, lg.grad, w);
      ++steps;
      if (!all_finite(up.new_params.values)) {
        result.divergence = fmt::format("non-finite parameters at epoch {} step {}", e, steps);
        break;
      }
    }
  }
  up.local_steps = steps;

  if (scaffold && !result.divergence) {
    const double lr_eff = cfg.lr.at_epoch(cfg.epochs - 1);
    const double inv = 1.0 / (static_cast<double>(steps) * lr_eff);
    std::vector<double> next(P), delta(P);
    for (std::size_t i = 0; i < P; ++i) {
      next[i] = (*ci)[i] - (*server_control)[i] + (global.values[i] - w[i]) * inv;
      delta[i] = next[i] - (*ci)[i];
    }
    if (!all_finite(next)) {
      result.divergence = "non-finite control variate";
    } else {
      up.next_control = std::move(next);
      up.delta_control = std::move(delta);
    }
  }
  return result;
}

nn::ModelParams aggregate_fedavg(std::span<const LocalUpdate> updates, Eq1Denominator denominator,
                                 std::size_t global_samples) {
  check_updates(updates);
  const auto sorted = sorted_by_client(updates);
  return weighted_sum(sorted, nullptr, size_weights(sorted, denominator, global_samples));
}

ScaffoldAggregate aggregate_scaffold(const ServerState& server, std::span<const LocalUpdate> updates,
                                     std::size_t total_clients, Eq1Denominator denominator,
                                     std::size_t global_samples) {
  check_updates(updates);
  if (total_clients < updates.size() || total_clients == 0) {
    throw std::invalid_argument("aggregate_scaffold: total clients smaller than sampled clients");
  }
  const std::size_t P = updates.front().new_params.size();
  for (const auto& u : updates) {
    if (!u.delta_control) {
      throw std::invalid_argument(
          fmt::format("aggregate_scaffold: update from client {} has no delta_control", u.client_id));
    }
    if (u.delta_control->size() != P) throw std::invalid_argument("delta_control length mismatch");
  }
  ScaffoldAggregate out;
  out.params = aggregate_fedavg(updates, denominator, global_samples);
  out.server_control = server.server_control.value_or(std::vector<double>(P, 0.0));
  if (out.server_control.size() != P) throw std::invalid_argument("server control length mismatch");

  const auto sorted = sorted_by_client(updates);
  std::vector<double> mean(P, 0.0);
  for (const auto* u : sorted) kernels::axpy(1.0, *u->delta_control, mean);
  const double s = static_cast<double>(sorted.size());
  const double scale = s / static_cast<double>(total_clients);
  for (std::size_t i = 0; i < P; ++i) out.server_control[i] += scale * (mean[i] / s);
  return out;
}

nn::ModelParams aggregate_fednova(const nn::ModelParams& global, std::span<const LocalUpdate> updates) {
  check_updates(updates);
  if (global.spec != updates.front().new_params.spec) {
    throw std::invalid_argument("aggregate_fednova: global model shape differs from updates");
  }
  const auto sorted = sorted_by_client(updates);
  std::uint64_t total = 0;
  std::uint64_t weighted_steps = 0;
  for (const auto* u : sorted) {
    if (u->local_steps == 0) {
      throw std::invalid_argument(
          fmt::format("aggregate_fednova: client {} reports zero local steps", u->client_id));
    }
    total += u->num_samples;
    weighted_steps += static_cast<std::uint64_t>(u->num_samples) * u->local_steps;
  }
  const double tau_eff = static_cast<double>(weighted_steps) / static_cast<double>(total);

  // global - tau_eff * sum p_i (global - w_i) / tau_i is the p-weighted mean of
  // w_i + (1 - tau_eff / tau_i) (global - w_i); with equal steps each term is w_i.
  std::vector<std::vector<double>> rescaled;
  rescaled.reserve(sorted.size());
  const std::size_t P = global.size();
  for (const auto* u : sorted) {
    const double keep = 1.0 - tau_eff / static_cast<double>(u->local_steps);
    std::vector<double> v = u->new_params.values;
    if (keep != 0.0) {
      for (std::size_t i = 0; i < P; ++i) v[i] += keep * (global.values[i] - v[i]);
    }
    rescaled.push_back(std::move(v));
  }
  return weighted_sum(sorted, &rescaled, size_weights(sorted, Eq1Denominator::kSampledSum, 0));
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<LocalTrainResult> train_clients(const ServerState& server,
                                            std::span<const ClientState> clients,
                                            std::span<const std::size_t> selected,
                                            const RoundEnv& env, const FlConfig& cfg,
                                            std::size_t round) {
  if (env.train == nullptr) throw std::invalid_argument("round environment has no training set");
  for (std::size_t id : selected) {
    if (id >= clients.size()) throw std::invalid_argument(fmt::format("unknown client id {}", id));
  }
  const std::vector<double>* control = server.server_control ? &*server.server_control : nullptr;
  std::vector<LocalTrainResult> results(selected.size());
  parallel_for(selected.size(), cfg.workers, [&](std::size_t i) {
    results[i] = local_train(clients[selected[i]], *env.train, server.global, cfg.local, control,
                             server.rng_seed, round, env.hook);
  });
  return results;
}

RoundResult finish_round(const ServerState& server, std::span<ClientState> clients,
                         const sampling::SamplingPlan& plan,
                         std::vector<LocalTrainResult> results, const RoundEnv& env,
                         const FlConfig& cfg, bool include_one_time_cost) {
  if (env.test == nullptr || env.partition == nullptr || env.train == nullptr) {
    throw std::invalid_argument("round environment is incomplete");
  }
  std::vector<LocalUpdate> accepted;
  RoundResult out;
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return a.update.client_id < b.update.client_id;
  });
  for (auto& r : results) {
    const std::size_t id = r.update.client_id;
    if (!std::binary_search(plan.selected.begin(), plan.selected.end(), id)) continue;
    if (r.divergence) {
      out.dropped.emplace_back(id, *r.divergence);
      continue;
    }
    clients[id].local_steps_taken += r.update.local_steps;
    if (r.update.next_control) clients[id].control_variate = *r.update.next_control;
    accepted.push_back(std::move(r.update));
  }

  out.server = server;
  const std::size_t global_samples = env.partition->total_samples();
  if (!accepted.empty()) {
    switch (cfg.local.algorithm) {
      case Algorithm::kFedAvg:
      case Algorithm::kFedProx:
        out.server.global = aggregate_fedavg(accepted, cfg.eq1_denominator, global_samples);
        break;
      case Algorithm::kScaffold: {
        auto agg = aggregate_scaffold(server, accepted, clients.size(), cfg.eq1_denominator,
                                      global_samples);
        out.server.global = std::move(agg.params);
        out.server.server_control = std::move(agg.server_control);
        break;
      }
      case Algorithm::kFedNova:
        out.server.global = aggregate_fednova(server.global, accepted);
        break;
    }
  }
  out.server.round = server.round + 1;

  const auto eval = metrics::evaluate_global(out.server.global, *env.test);
  out.cost = metrics::comm_cost_step(env.cost, plan, cfg.local.algorithm, include_one_time_cost,
                                     env.previous_cumulative_bytes);
  out.metrics.round = out.server.round;
  out.metrics.test_accuracy = eval.accuracy;
  out.metrics.test_loss = eval.loss;
  out.metrics.sample_relative_entropy = metrics::sample_relative_entropy(
      plan, *env.partition, env.train->labels, env.train->num_classes);
  out.metrics.cumulative_bytes = out.cost.cumulative_bytes;
  return out;
}

RoundResult run_round(const ServerState& server, std::span<ClientState> clients,
                      const sampling::SamplingPlan& plan, const RoundEnv& env,
                      const FlConfig& cfg) {
  if (plan.selected.empty()) throw std::invalid_argument("run_round: empty sampling plan");
  if (cfg.local.algorithm == Algorithm::kScaffold && !server.server_control) {
    throw std::invalid_argument("run_round: scaffold requires a server control variate");
  }
  auto results = train_clients(server, clients, plan.selected, env, cfg, server.round + 1);
  return finish_round(server, clients, plan, std::move(results), env, cfg);
}

}  // namespace lefl::fl
