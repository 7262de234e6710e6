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

#include "lefl/preprocess.hpp"

#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace lefl::sampling {

PreprocessResult preprocess_lefl(std::span<const fl::ClientState> clients,
                                 const fl::ServerState& server, const data::Dataset& train,
                                 const data::PublicDataset& probe, const PreprocessConfig& cfg,
                                 const metrics::CostModel& cost) {
  if (clients.empty()) throw std::invalid_argument("preprocess_lefl: no clients");
  if (probe.size() == 0) throw std::invalid_argument("preprocess_lefl: empty public dataset");
  if (probe.features.cols() != server.global.spec.input_dim()) {
    throw std::invalid_argument("preprocess_lefl: public data dimension does not match the model");
  }
  const std::size_t n = clients.size();
  std::vector<std::size_t> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);

  fl::RoundEnv env;
  env.train = &train;
  fl::FlConfig fl_cfg;
  fl_cfg.local = cfg.local;
  fl_cfg.workers = cfg.workers;

  PreprocessResult out;
  out.local = fl::train_clients(server, clients, everyone, env, fl_cfg, server.round + 1);
  out.soft_labels.resize(n);
  out.latents.resize(n);
  fl::parallel_for(n, cfg.workers, [&](std::size_t i) {
    const auto& r = out.local[i];
    if (r.divergence) {
      throw std::runtime_error(
          fmt::format("client {} diverged during preprocessing: {}", r.update.client_id, *r.divergence));
    }
    auto fwd = nn::forward(r.update.new_params, probe.features);
    out.soft_labels[i] = std::move(fwd.soft);
    out.latents[i] = std::move(fwd.latent);
  });

  out.similarity = build_similarity_matrix(out.soft_labels, cfg.reduction);
  const std::size_t k = cfg.cluster_k.value_or(default_cluster_count(n));
  out.clusters = kmeans_cluster(out.similarity, k, cfg.cluster_seed, cfg.kmeans);

  out.cost.round = server.round + 1;
  out.cost.one_time_bytes = cost.one_time_bytes();
  out.cost.round_bytes = out.cost.one_time_bytes;
  out.cost.cumulative_bytes = out.cost.one_time_bytes;
  return out;
}

}  // namespace lefl::sampling
