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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "lefl/experiment.hpp"
#include "lefl/kernels.hpp"

namespace {

using lefl::experiment::ConfigError;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(fmt::format("{}: invalid JSON: {}", path, e.what()));
  }
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::optional<std::size_t> rounds;
  std::string algorithm;
  std::string sampler;
  std::string name;
  std::string output_dir;
  std::vector<std::string> sets;
};

int do_run(const RunArgs& a) {
  auto doc = load_json(a.config);
  if (a.seed) doc["seed"] = *a.seed;
  if (a.rounds) doc["rounds"] = *a.rounds;
  if (!a.algorithm.empty()) doc["algorithm"] = a.algorithm;
  if (!a.sampler.empty()) doc["sampler"] = a.sampler;
  if (!a.name.empty()) doc["name"] = a.name;
  if (!a.output_dir.empty()) doc["output_dir"] = a.output_dir;
  for (const auto& s : a.sets) lefl::experiment::apply_override(doc, s);

  const auto cfg = lefl::experiment::config_from_json(doc);
  cfg.validate();
  std::cerr << fmt::format("running {} ({} + {}, {} rounds, kernels: {})\n", cfg.name,
                           lefl::algorithm_name(cfg.algorithm),
                           cfg.sampler == lefl::experiment::Sampler::kLefl ? "lefl" : "uniform",
                           cfg.rounds, lefl::kernels::backend_name(lefl::kernels::active_backend()));
  const auto result = lefl::experiment::run_simulation(cfg, a.workers);
  if (result.dropped_updates > 0) {
    std::cerr << fmt::format("warning: {} client updates diverged and were dropped\n",
                             result.dropped_updates);
  }
  const auto dir = lefl::experiment::write_artifacts(result);
  const auto& last = result.metrics.back();
  std::cout << fmt::format("{}: final accuracy {:.4f}, loss {:.4f}, {} bytes\n", dir.string(),
                           last.test_accuracy, last.test_loss, last.cumulative_bytes);
  return 0;
}

int do_compare(double target, const std::vector<std::string>& dirs, const std::string& output) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const auto cmp = lefl::experiment::compare_runs(paths, target);
  std::cout << fmt::format("{:<24} {:>10} {:>16} {:>14} {:>16} {:>16}\n", "run", "rounds", "bytes",
                           "one_time", "delta", "delta_recurring");
  for (const auto& r : cmp["runs"]) {
    std::cout << fmt::format("{:<24} {:>10} {:>16} {:>14} {:>16} {:>16}\n",
                             r["name"].get<std::string>(), r["rounds_label"].get<std::string>(),
                             r["bytes_to_target"].get<std::int64_t>(),
                             r["one_time_bytes"].get<std::uint64_t>(), r["delta_bytes"].get<std::int64_t>(),
                             r["delta_recurring_bytes"].get<std::int64_t>());
  }
  if (!output.empty()) {
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write " + output);
    out << cmp.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with low-entropy client sampling"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("--config", run_args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_args.seed, "Master seed (overrides the config)");
  run->add_option("--workers", run_args.workers, "Client training threads")->check(CLI::PositiveNumber);
  run->add_option("--rounds", run_args.rounds, "Number of rounds");
  run->add_option("--algorithm", run_args.algorithm, "fedavg | fedprox | scaffold | fednova");
  run->add_option("--sampler", run_args.sampler, "uniform | lefl");
  run->add_option("--name", run_args.name, "Run name (output subdirectory)");
  run->add_option("--output-dir", run_args.output_dir, "Parent directory for run outputs");
  run->add_option("--set", run_args.sets, "Override any config field, e.g. partition.beta=0.1");

  double target = 0.0;
  std::vector<std::string> dirs;
  std::string output;
  auto* compare = app.add_subcommand("compare", "Compare rounds and bytes to a target accuracy");
  compare->add_option("--target", target, "Target test accuracy in (0, 1)")->required();
  compare->add_option("--output", output, "Also write the comparison as JSON");
  compare->add_option("dirs", dirs, "Run directories; the first is the baseline")->required()->expected(2, -1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(run_args);
    return do_compare(target, dirs, output);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
