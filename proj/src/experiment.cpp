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

#include "lefl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lefl/kernels.hpp"
#include "lefl/preprocess.hpp"
#include "lefl/rng.hpp"

namespace lefl::experiment {
namespace {

using json = nlohmann::json;

std::string_view sampler_name(Sampler s) { return s == Sampler::kLefl ? "lefl" : "uniform"; }

template <typename T>
T read_field(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, fmt::format("wrong type ({})", j.type_name()));
  }
}

std::size_t read_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw ConfigError(field, "expected a non-negative integer");
  }
  if (j.is_number_integer() && j.get<long long>() < 0) {
    throw ConfigError(field, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

double read_real(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

void reject_unknown(const json& j, const std::string& prefix, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "config" : prefix, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown field");
    }
  }
}

template <typename Enum>
Enum read_choice(const json& j, const std::string& field,
                 std::initializer_list<std::pair<std::string_view, Enum>> choices) {
  const auto s = read_field<std::string>(j, field);
  std::string options;
  for (const auto& [name, value] : choices) {
    if (s == name) return value;
    options += options.empty() ? std::string(name) : ", " + std::string(name);
  }
  throw ConfigError(field, fmt::format("unknown value '{}' (expected one of {})", s, options));
}

const std::initializer_list<std::pair<std::string_view, fl::Eq1Denominator>> kEq1Choices = {
    {"sampled_sum", fl::Eq1Denominator::kSampledSum}, {"global", fl::Eq1Denominator::kGlobal}};
const std::initializer_list<std::pair<std::string_view, Round1Participation>> kRound1Choices = {
    {"all", Round1Participation::kAll}, {"sampled", Round1Participation::kSampled}};
const std::initializer_list<std::pair<std::string_view, sampling::SoftLabelReduction>> kReductionChoices = {
    {"per_sample_mean", sampling::SoftLabelReduction::kPerSampleMean},
    {"mean_distribution", sampling::SoftLabelReduction::kMeanDistribution}};
const std::initializer_list<std::pair<std::string_view, ClientStateMode>> kClientStateChoices = {
    {"persistent", ClientStateMode::kPersistent}, {"stateless", ClientStateMode::kStateless}};
const std::initializer_list<std::pair<std::string_view, Sampler>> kSamplerChoices = {
    {"uniform", Sampler::kUniform}, {"lefl", Sampler::kLefl}};

template <typename Enum>
std::string_view choice_name(Enum value, std::initializer_list<std::pair<std::string_view, Enum>> choices) {
  for (const auto& [name, v] : choices) {
    if (v == value) return name;
  }
  return "unknown";
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

data::Partition make_partition(const ExperimentConfig& cfg, const data::Dataset& train,
                               std::uint64_t seed) {
  const auto& pc = cfg.partition;
  try {
    if (pc.type == "dirichlet") return data::partition_dirichlet(train, cfg.n_clients, pc.beta, seed);
    if (pc.type == "quantity") {
      return data::partition_quantity(train, cfg.n_clients, pc.labels_per_client, seed);
    }
    if (pc.type == "manual") return data::partition_manual(train, pc.groups);
    return data::partition_iid(train, cfg.n_clients, seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("partition", e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..") {
    throw ConfigError("name", "must be a non-empty single path component");
  }
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (dataset.type == "blobs") {
    if (dataset.num_classes < 2) throw ConfigError("dataset.num_classes", "must be >= 2");
    if (dataset.dim < 1) throw ConfigError("dataset.dim", "must be >= 1");
    if (dataset.per_class < 1) throw ConfigError("dataset.per_class", "must be >= 1");
    if (dataset.test_per_class < 1) throw ConfigError("dataset.test_per_class", "must be >= 1");
    if (!(dataset.spread >= 0.0) || !std::isfinite(dataset.spread)) {
      throw ConfigError("dataset.spread", "must be finite and >= 0");
    }
  } else if (dataset.type == "csv") {
    if (dataset.train_path.empty()) throw ConfigError("dataset.train", "path required for csv datasets");
  } else {
    throw ConfigError("dataset.type", "must be 'blobs' or 'csv'");
  }
  if (n_clients < 1) throw ConfigError("n_clients", "must be >= 1");
  if (partition.type == "dirichlet") {
    if (!(partition.beta > 0.0) || !std::isfinite(partition.beta)) {
      throw ConfigError("partition.beta", "must be > 0");
    }
  } else if (partition.type == "quantity") {
    if (partition.labels_per_client < 1) {
      throw ConfigError("partition.labels_per_client", "must be >= 1");
    }
    if (dataset.type == "blobs") {
      if (partition.labels_per_client > dataset.num_classes) {
        throw ConfigError("partition.labels_per_client", "exceeds the number of classes");
      }
      if (n_clients * partition.labels_per_client < dataset.num_classes) {
        throw ConfigError("partition.labels_per_client",
                          fmt::format("infeasible: {} clients x {} labels cannot cover {} classes",
                                      n_clients, partition.labels_per_client, dataset.num_classes));
      }
    }
  } else if (partition.type == "manual") {
    if (partition.groups.empty()) throw ConfigError("partition.groups", "must not be empty");
    std::size_t total = 0;
    std::set<int> seen;
    for (const auto& g : partition.groups) {
      if (g.client_count == 0 || g.labels.empty()) throw ConfigError("partition.groups", "empty group");
      for (int k : g.labels) {
        if (k < 0 || (dataset.type == "blobs" && static_cast<std::size_t>(k) >= dataset.num_classes)) {
          throw ConfigError("partition.groups", fmt::format("label {} out of range", k));
        }
        if (!seen.insert(k).second) {
          throw ConfigError("partition.groups", fmt::format("label {} listed in two groups", k));
        }
      }
      total += g.client_count;
    }
    if (total != n_clients) {
      throw ConfigError("n_clients", fmt::format("manual groups define {} clients, not {}", total, n_clients));
    }
  } else if (partition.type != "iid") {
    throw ConfigError("partition.type", "must be dirichlet, quantity, manual or iid");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model.hidden", "layer widths must be >= 1");
  }
  if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) {
    throw ConfigError("sample_ratio", "must be in (0, 1]");
  }
  if (sample_ratio * static_cast<double>(n_clients) < 1.0) {
    throw ConfigError("sample_ratio", "selects no clients (sample_ratio * n_clients < 1)");
  }
  if (rounds < 1) throw ConfigError("rounds", "must be >= 1");
  if (local_epochs < 1) throw ConfigError("local_epochs", "must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay", "must be in (0, 1]");
  if (!(prox_mu >= 0.0) || !std::isfinite(prox_mu)) throw ConfigError("prox_mu", "must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (cluster_k > n_clients) throw ConfigError("cluster_k", "exceeds n_clients");
  if (sampler == Sampler::kLefl && public_count < 1) throw ConfigError("public_count", "must be >= 1");
  if (!seed) throw ConfigError("seed", "required (pass --seed or set it in the config)");
  if (target_accuracy && !(*target_accuracy > 0.0 && *target_accuracy < 1.0)) {
    throw ConfigError("target_accuracy", "must be in (0, 1)");
  }
  if (algorithm == Algorithm::kScaffold && client_state == ClientStateMode::kStateless) {
    throw ConfigError("client_state", "scaffold needs persistent clients to store control variates");
  }
}

std::size_t ExperimentConfig::budget() const {
  const auto b = static_cast<std::size_t>(std::llround(sample_ratio * static_cast<double>(n_clients)));
  return std::clamp<std::size_t>(b, 1, n_clients);
}

nn::ModelSpec ExperimentConfig::model_spec() const {
  nn::ModelSpec spec;
  spec.layer_sizes.push_back(dataset.dim);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(dataset.num_classes);
  return spec;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, "", {"name", "output_dir", "dataset", "partition", "n_clients", "model",
                         "algorithm", "sampler", "sample_ratio", "rounds", "local_epochs", "lr",
                         "decay", "prox_mu", "batch_size", "cluster_k", "public_count", "seed",
                         "eq1_denominator", "round1_participation", "soft_label_reduction",
                         "client_state", "target_accuracy", "baseline_run"});
  ExperimentConfig c;
  if (j.contains("name")) c.name = read_field<std::string>(j["name"], "name");
  if (j.contains("output_dir")) c.output_dir = read_field<std::string>(j["output_dir"], "output_dir");
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d, "dataset", {"type", "num_classes", "dim", "per_class", "test_per_class", "spread",
                                  "train", "test"});
    if (d.contains("type")) c.dataset.type = read_field<std::string>(d["type"], "dataset.type");
    if (d.contains("num_classes")) c.dataset.num_classes = read_count(d["num_classes"], "dataset.num_classes");
    if (d.contains("dim")) c.dataset.dim = read_count(d["dim"], "dataset.dim");
    if (d.contains("per_class")) c.dataset.per_class = read_count(d["per_class"], "dataset.per_class");
    if (d.contains("test_per_class")) {
      c.dataset.test_per_class = read_count(d["test_per_class"], "dataset.test_per_class");
    }
    if (d.contains("spread")) c.dataset.spread = read_real(d["spread"], "dataset.spread");
    if (d.contains("train")) c.dataset.train_path = read_field<std::string>(d["train"], "dataset.train");
    if (d.contains("test")) c.dataset.test_path = read_field<std::string>(d["test"], "dataset.test");
  }
  bool n_given = j.contains("n_clients");
  if (n_given) c.n_clients = read_count(j["n_clients"], "n_clients");
  if (j.contains("partition")) {
    const auto& p = j["partition"];
    reject_unknown(p, "partition", {"type", "beta", "labels_per_client", "groups"});
    if (p.contains("type")) c.partition.type = read_field<std::string>(p["type"], "partition.type");
    if (p.contains("beta")) c.partition.beta = read_real(p["beta"], "partition.beta");
    if (p.contains("labels_per_client")) {
      c.partition.labels_per_client = read_count(p["labels_per_client"], "partition.labels_per_client");
    }
    if (p.contains("groups")) {
      if (!p["groups"].is_array()) throw ConfigError("partition.groups", "expected an array");
      for (const auto& g : p["groups"]) {
        reject_unknown(g, "partition.groups", {"clients", "labels"});
        data::ManualGroup mg;
        if (!g.contains("clients") || !g.contains("labels")) {
          throw ConfigError("partition.groups", "each group needs 'clients' and 'labels'");
        }
        mg.client_count = read_count(g["clients"], "partition.groups.clients");
        mg.labels = read_field<std::vector<int>>(g["labels"], "partition.groups.labels");
        c.partition.groups.push_back(std::move(mg));
      }
      if (!n_given) {
        c.n_clients = 0;
        for (const auto& g : c.partition.groups) c.n_clients += g.client_count;
      }
    }
  }
  if (j.contains("model")) {
    reject_unknown(j["model"], "model", {"hidden"});
    if (j["model"].contains("hidden")) {
      c.hidden = read_field<std::vector<std::size_t>>(j["model"]["hidden"], "model.hidden");
    }
  }
  if (j.contains("algorithm")) {
    try {
      c.algorithm = parse_algorithm(read_field<std::string>(j["algorithm"], "algorithm"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("algorithm", e.what());
    }
  }
  if (j.contains("sampler")) c.sampler = read_choice(j["sampler"], "sampler", kSamplerChoices);
  if (j.contains("sample_ratio")) c.sample_ratio = read_real(j["sample_ratio"], "sample_ratio");
  if (j.contains("rounds")) c.rounds = read_count(j["rounds"], "rounds");
  if (j.contains("local_epochs")) c.local_epochs = read_count(j["local_epochs"], "local_epochs");
  if (j.contains("lr")) c.lr = read_real(j["lr"], "lr");
  if (j.contains("decay")) c.decay = read_real(j["decay"], "decay");
  if (j.contains("prox_mu")) c.prox_mu = read_real(j["prox_mu"], "prox_mu");
  if (j.contains("batch_size")) c.batch_size = read_count(j["batch_size"], "batch_size");
  if (j.contains("cluster_k")) c.cluster_k = read_count(j["cluster_k"], "cluster_k");
  if (j.contains("public_count")) c.public_count = read_count(j["public_count"], "public_count");
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = read_count(j["seed"], "seed");
  if (j.contains("eq1_denominator")) {
    c.eq1_denominator = read_choice(j["eq1_denominator"], "eq1_denominator", kEq1Choices);
  }
  if (j.contains("round1_participation")) {
    c.round1_participation = read_choice(j["round1_participation"], "round1_participation", kRound1Choices);
  }
  if (j.contains("soft_label_reduction")) {
    c.soft_label_reduction = read_choice(j["soft_label_reduction"], "soft_label_reduction", kReductionChoices);
  }
  if (j.contains("client_state")) {
    c.client_state = read_choice(j["client_state"], "client_state", kClientStateChoices);
  }
  if (j.contains("target_accuracy") && !j["target_accuracy"].is_null()) {
    c.target_accuracy = read_real(j["target_accuracy"], "target_accuracy");
  }
  if (j.contains("baseline_run")) c.baseline_run = read_field<std::string>(j["baseline_run"], "baseline_run");
  return c;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["output_dir"] = c.output_dir;
  nlohmann::ordered_json d;
  d["type"] = c.dataset.type;
  if (c.dataset.type == "blobs") {
    d["num_classes"] = c.dataset.num_classes;
    d["dim"] = c.dataset.dim;
    d["per_class"] = c.dataset.per_class;
    d["test_per_class"] = c.dataset.test_per_class;
    d["spread"] = c.dataset.spread;
  } else {
    d["train"] = c.dataset.train_path;
    if (!c.dataset.test_path.empty()) d["test"] = c.dataset.test_path;
  }
  j["dataset"] = d;
  nlohmann::ordered_json p;
  p["type"] = c.partition.type;
  if (c.partition.type == "dirichlet") p["beta"] = c.partition.beta;
  if (c.partition.type == "quantity") p["labels_per_client"] = c.partition.labels_per_client;
  if (c.partition.type == "manual") {
    p["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : c.partition.groups) {
      p["groups"].push_back({{"clients", g.client_count}, {"labels", g.labels}});
    }
  }
  j["partition"] = p;
  j["n_clients"] = c.n_clients;
  j["model"] = {{"hidden", c.hidden}};
  j["algorithm"] = algorithm_name(c.algorithm);
  j["sampler"] = sampler_name(c.sampler);
  j["sample_ratio"] = c.sample_ratio;
  j["rounds"] = c.rounds;
  j["local_epochs"] = c.local_epochs;
  j["lr"] = c.lr;
  j["decay"] = c.decay;
  j["prox_mu"] = c.prox_mu;
  j["batch_size"] = c.batch_size;
  j["cluster_k"] = c.cluster_k;
  j["public_count"] = c.public_count;
  j["seed"] = c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json(nullptr);
  j["eq1_denominator"] = choice_name(c.eq1_denominator, kEq1Choices);
  j["round1_participation"] = choice_name(c.round1_participation, kRound1Choices);
  j["soft_label_reduction"] = choice_name(c.soft_label_reduction, kReductionChoices);
  j["client_state"] = choice_name(c.client_state, kClientStateChoices);
  j["target_accuracy"] =
      c.target_accuracy ? nlohmann::ordered_json(*c.target_accuracy) : nlohmann::ordered_json(nullptr);
  j["baseline_run"] = c.baseline_run;
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::stringstream ks(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ks, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError(key, "cannot descend into a non-object");
    node = &next;
  }
  (*node)[parts.back()] = std::move(value);
}

SimulationResult run_simulation(const ExperimentConfig& cfg, std::size_t workers) {
  cfg.validate();
  const std::uint64_t seed = *cfg.seed;
  SimulationResult res;
  res.config = cfg;

  if (cfg.dataset.type == "blobs") {
    auto all = data::synth_blobs(cfg.dataset.num_classes, cfg.dataset.dim,
                                 cfg.dataset.per_class + cfg.dataset.test_per_class, cfg.dataset.spread,
                                 derive_seed(seed, {stream_id("data")}));
    std::tie(res.train, res.test) = data::split_holdout(all, cfg.dataset.test_per_class);
  } else {
    res.train = data::load_csv(cfg.dataset.train_path);
    res.test = cfg.dataset.test_path.empty() ? res.train
                                             : data::load_csv(cfg.dataset.test_path, res.train.num_classes);
    if (res.test.dim() != res.train.dim()) throw ConfigError("dataset.test", "feature dimension differs from train");
    res.config.dataset.dim = res.train.dim();
    res.config.dataset.num_classes = res.train.num_classes;
  }
  const ExperimentConfig& rc = res.config;
  res.partition = make_partition(rc, res.train, derive_seed(seed, {stream_id("partition")}));
  data::check_partition(res.partition, res.train.size());

  const std::size_t n = res.partition.num_clients();
  std::vector<fl::ClientState> clients(n);
  for (std::size_t i = 0; i < n; ++i) {
    clients[i].id = i;
    clients[i].data = res.partition.clients[i];
  }
  const nn::ModelSpec spec = rc.model_spec();
  const bool scaffold = rc.algorithm == Algorithm::kScaffold;
  fl::ServerState server;
  server.global = nn::init_params(spec, derive_seed(seed, {stream_id("init")}));
  if (scaffold) server.server_control = std::vector<double>(spec.num_params(), 0.0);
  server.rng_seed = seed;

  const bool lefl = rc.sampler == Sampler::kLefl;
  metrics::CostModel cost;
  cost.model_bytes = metrics::wire_bytes(spec.num_params());
  cost.num_clients = n;
  if (lefl) {
    cost.public_bytes = metrics::wire_bytes(rc.public_count * rc.dataset.dim);
    cost.soft_label_bytes = metrics::wire_bytes(rc.public_count * rc.dataset.num_classes);
  }
  res.one_time_bytes = lefl ? cost.one_time_bytes() : 0;

  fl::FlConfig fl_cfg;
  fl_cfg.local.epochs = rc.local_epochs;
  fl_cfg.local.batch_size = rc.batch_size;
  fl_cfg.local.lr = {rc.lr, rc.decay};
  fl_cfg.local.algorithm = rc.algorithm;
  fl_cfg.local.prox_mu = rc.prox_mu;
  fl_cfg.eq1_denominator = rc.eq1_denominator;
  fl_cfg.workers = workers;

  fl::RoundEnv env;
  env.train = &res.train;
  env.test = &res.test;
  env.partition = &res.partition;
  env.cost = cost;

  const std::uint64_t sampling_seed = derive_seed(seed, {stream_id("sampling")});
  const std::size_t budget = rc.budget();

  for (std::size_t r = 1; r <= rc.rounds; ++r) {
    fl::RoundResult rr;
    if (lefl && r == 1) {
      sampling::PreprocessConfig pc;
      pc.local = fl_cfg.local;
      if (rc.cluster_k != 0) pc.cluster_k = rc.cluster_k;
      pc.reduction = rc.soft_label_reduction;
      pc.cluster_seed = derive_seed(seed, {stream_id("cluster")});
      pc.workers = workers;
      const auto probe = data::synth_public(rc.dataset.dim, rc.public_count,
                                            derive_seed(seed, {stream_id("public")}));
      auto pre = sampling::preprocess_lefl(clients, server, res.train, probe, pc, cost);
      sampling::SamplingPlan plan;
      if (rc.round1_participation == Round1Participation::kAll) {
        plan.round = 1;
        plan.selected.resize(n);
        std::iota(plan.selected.begin(), plan.selected.end(), 0);
      } else {
        plan = sampling::uniform_sample(n, budget, 1, sampling_seed);
      }
      rr = fl::finish_round(server, clients, plan, std::move(pre.local), env, fl_cfg,
                            /*include_one_time_cost=*/true);
      // Every client downloaded the model to produce its soft labels.
      const std::uint64_t extra = static_cast<std::uint64_t>(n - plan.selected.size()) *
                                  rr.cost.per_client_down_bytes;
      rr.cost.round_bytes += extra;
      rr.cost.cumulative_bytes += extra;
      rr.metrics.cumulative_bytes += extra;
      res.similarity = std::move(pre.similarity);
      res.clusters = std::move(pre.clusters);
      res.probe_latents = std::move(pre.latents);
    } else {
      const auto plan = lefl ? sampling::stratified_sample(*res.clusters, budget, r, sampling_seed)
                             : sampling::uniform_sample(n, budget, r, sampling_seed);
      rr = fl::run_round(server, clients, plan, env, fl_cfg);
    }
    if (res.per_client_round_bytes == 0) {
      res.per_client_round_bytes = rr.cost.per_client_down_bytes + rr.cost.per_client_up_bytes;
    }
    res.dropped_updates += rr.dropped.size();
    env.previous_cumulative_bytes = rr.metrics.cumulative_bytes;
    server = std::move(rr.server);
    res.metrics.push_back(rr.metrics);
    if (rc.client_state == ClientStateMode::kStateless) {
      for (auto& c : clients) c.control_variate.reset();
    }
  }
  res.final_server = std::move(server);
  return res;
}

nlohmann::ordered_json summary_json(const SimulationResult& r) {
  nlohmann::ordered_json s;
  const auto& c = r.config;
  s["name"] = c.name;
  s["algorithm"] = algorithm_name(c.algorithm);
  s["sampler"] = sampler_name(c.sampler);
  s["rounds"] = r.metrics.size();
  s["n_clients"] = r.partition.num_clients();
  s["clients_per_round"] = c.budget();
  s["num_params"] = r.final_server.global.size();
  s["model_bytes"] = metrics::wire_bytes(r.final_server.global.size());
  s["per_client_round_bytes"] = r.per_client_round_bytes;
  s["one_time_bytes"] = r.one_time_bytes;
  s["total_bytes"] = r.metrics.empty() ? 0 : r.metrics.back().cumulative_bytes;
  s["final_accuracy"] = r.metrics.empty() ? 0.0 : r.metrics.back().test_accuracy;
  s["final_loss"] = r.metrics.empty() ? 0.0 : r.metrics.back().test_loss;
  double best = 0.0, entropy = 0.0;
  for (const auto& m : r.metrics) {
    best = std::max(best, m.test_accuracy);
    entropy += m.sample_relative_entropy;
  }
  s["best_accuracy"] = best;
  s["mean_sample_entropy"] = r.metrics.empty() ? 0.0 : entropy / static_cast<double>(r.metrics.size());
  s["dropped_updates"] = r.dropped_updates;
  if (r.clusters) s["cluster_k"] = r.clusters->k;
  if (c.target_accuracy) {
    const auto rtt = metrics::rounds_to_target(r.metrics, *c.target_accuracy);
    s["target_accuracy"] = *c.target_accuracy;
    s["rounds_to_target"] = rtt ? nlohmann::ordered_json(*rtt) : nlohmann::ordered_json(nullptr);
  }
  s["kernel_backend"] = kernels::backend_name(kernels::active_backend());
  return s;
}

std::filesystem::path write_artifacts(const SimulationResult& result) {
  const auto dir = std::filesystem::path(result.config.output_dir) / result.config.name;
  std::filesystem::create_directories(dir);
  write_file(dir / "config.json", config_to_json(result.config).dump(2) + "\n");
  write_file(dir / "metrics.csv", metrics::metrics_to_csv(result.metrics));
  write_file(dir / "partition.json", data::partition_to_json(result.partition) + "\n");
  if (result.similarity) {
    write_file(dir / "similarity_matrix.csv", sampling::similarity_to_csv(*result.similarity));
  }
  if (result.clusters) write_file(dir / "clusters.json", sampling::clusters_to_json(*result.clusters) + "\n");

  auto summary = summary_json(result);
  if (!result.config.baseline_run.empty()) {
    const double target = result.config.target_accuracy.value_or(1.0 - 1e-9);
    const std::vector<std::filesystem::path> dirs = {result.config.baseline_run, dir};
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    const auto cmp = compare_runs(dirs, target);
    summary["baseline_run"] = result.config.baseline_run;
    summary["delta_bytes_vs_baseline"] = cmp["runs"][1]["delta_bytes"];
    summary["delta_recurring_bytes_vs_baseline"] = cmp["runs"][1]["delta_recurring_bytes"];
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  return dir;
}

std::filesystem::path run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  return write_artifacts(run_simulation(cfg, workers));
}

nlohmann::ordered_json compare_runs(std::span<const std::filesystem::path> dirs, double target_accuracy) {
  if (dirs.size() < 2) throw std::invalid_argument("compare_runs: need at least two run directories");
  if (!(target_accuracy > 0.0 && target_accuracy < 1.0)) {
    throw std::invalid_argument("compare_runs: target accuracy must be in (0, 1)");
  }
  struct Row {
    nlohmann::ordered_json out;
    std::int64_t bytes = 0;
    std::int64_t recurring = 0;
  };
  std::vector<Row> rows;
  for (const auto& d : dirs) {
    if (!std::filesystem::exists(d / "metrics.csv")) {
      throw std::runtime_error("missing metrics file: " + (d / "metrics.csv").string());
    }
    if (!std::filesystem::exists(d / "summary.json")) {
      throw std::runtime_error("missing summary file: " + (d / "summary.json").string());
    }
    const auto stream = metrics::metrics_from_csv(read_file(d / "metrics.csv"));
    if (stream.empty()) throw std::runtime_error("empty metrics file in " + d.string());
    const auto summary = json::parse(read_file(d / "summary.json"));
    const auto one_time = summary.value("one_time_bytes", std::uint64_t{0});
    const auto rtt = metrics::rounds_to_target(stream, target_accuracy);
    Row row;
    row.bytes = static_cast<std::int64_t>(rtt ? stream[*rtt - 1].cumulative_bytes
                                              : stream.back().cumulative_bytes);
    row.recurring = row.bytes - static_cast<std::int64_t>(one_time);
    row.out["dir"] = d.string();
    row.out["name"] = summary.value("name", d.filename().string());
    row.out["algorithm"] = summary.value("algorithm", "");
    row.out["sampler"] = summary.value("sampler", "");
    row.out["reached"] = rtt.has_value();
    row.out["rounds_to_target"] = rtt ? nlohmann::ordered_json(*rtt) : nlohmann::ordered_json(nullptr);
    row.out["rounds_label"] = rtt ? std::to_string(*rtt) : ">" + std::to_string(stream.back().round);
    row.out["per_client_round_bytes"] = summary.value("per_client_round_bytes", std::uint64_t{0});
    row.out["bytes_to_target"] = row.bytes;
    row.out["one_time_bytes"] = one_time;
    row.out["recurring_bytes_to_target"] = row.recurring;
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json out;
  out["target_accuracy"] = target_accuracy;
  out["baseline"] = dirs.front().string();
  out["runs"] = nlohmann::ordered_json::array();
  for (auto& row : rows) {
    row.out["delta_bytes"] = row.bytes - rows.front().bytes;
    row.out["delta_recurring_bytes"] = row.recurring - rows.front().recurring;
    // Lower bound only: a run that never reached the target would need more.
    row.out["delta_is_lower_bound"] = !row.out["reached"].get<bool>();
    out["runs"].push_back(row.out);
  }
  return out;
}

}  // namespace lefl::experiment
