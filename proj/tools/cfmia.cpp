// Copyright 2026 The cfmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// cfmia command line: staged and end-to-end recourse membership audits.
//
//   cfmia gen-data  --config c.json [--out dir]
//   cfmia train     --config c.json [--out dir]
//   cfmia recourse  --config c.json [--out dir]
//   cfmia attack    --config c.json [--game dir/game.json] [--out dir]
//   cfmia run       --config c.json [--seed s] [--out dir] [--workers n]
//   cfmia sweep     --config c.json [--out dir]
//   cfmia dp-bound  --epsilon 0.5 1.0 ...
//   cfmia summarize --out summary.csv report.json|dir...
//
// Exit status: 0 success, 1 configuration error, 2 runtime error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfmia/cfmia.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cfmia;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, CommonFlags& f, bool require_config = true) {
  auto* opt = app->add_option("--config", f.config, "experiment configuration (JSON)");
  if (require_config) opt->required()->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed override");
  app->add_option("--out", f.out, "output directory override");
  app->add_option("--workers", f.workers, "worker threads override")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.output_dir = *f.out;
  if (f.workers) c.workers = *f.workers;
  return c;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p);
  if (!out) fail_runtime("cannot write '", p.string(), "'");
  out << j.dump(2) << '\n';
  if (!out) fail_runtime("write to '", p.string(), "' failed");
}

int cmd_gen_data(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f);
  Dataset data = load_experiment_data(c);
  nlohmann::json scaler = nullptr;
  if (c.data.should_standardize()) {
    auto [std_data, params] = standardize(data);
    data = std::move(std_data);
    scaler = {{"mean", to_std(params.mean)}, {"std", to_std(params.std)}};
  }
  fs::create_directories(c.output_dir);
  write_csv(data, (fs::path(c.output_dir) / "data.csv").string());
  write_json(fs::path(c.output_dir) / "provenance.json",
             {{"provenance", to_json(data.provenance())}, {"scaler", scaler}});
  std::cout << "wrote " << data.n() << " rows x " << data.d() << " features to " << c.output_dir << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f);
  const OwnerSetup owner = prepare_owner(c);
  fs::create_directories(c.output_dir);
  save_model(owner.model, (fs::path(c.output_dir) / "owner_model").string());
  if (owner.vae) save_vae(*owner.vae, (fs::path(c.output_dir) / "owner_vae").string());
  const auto& m = owner.model.meta();
  std::printf("train accuracy %.4f, held-out accuracy %.4f\n", m.train_accuracy, m.test_accuracy);
  return 0;
}

int cmd_recourse(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f);
  const OwnerSetup owner = prepare_owner(c);
  const OwnerOracle oracle(owner.model);
  const GameResult game = play_game(c, owner, oracle);
  write_json(fs::path(c.output_dir) / "game.json", to_json(game));
  std::cout << game.count(Guess::kMember) << " member and " << game.count(Guess::kNonMember)
            << " non-member recourses (" << game.member_failures + game.non_member_failures << " failures)\n";
  return 0;
}

int cmd_attack(const CommonFlags& f, const std::string& game_path) {
  const ExperimentConfig c = resolve(f);
  const fs::path path = game_path.empty() ? fs::path(c.output_dir) / "game.json" : fs::path(game_path);
  const GameResult game = game_from_json(read_json_file(path.string()));
  // The owner model is rebuilt deterministically from the configuration; only
  // the loss baselines query it.
  const OwnerSetup owner = prepare_owner(c);
  const OwnerOracle oracle(owner.model);
  const ExperimentReport rep = score_game(c, owner, oracle, game);
  write_report(rep, c.output_dir);
  for (const auto& a : rep.attacks) {
    std::printf("%-9s forward AUC %.4f  reversed AUC %.4f\n", to_string(a.kind).c_str(), a.forward.auc,
                a.reversed.auc);
  }
  return 0;
}

int cmd_run(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f);
  const ExperimentReport rep = run_experiment(c, true);
  for (const auto& a : rep.attacks) {
    std::printf("%-9s forward AUC %.4f  reversed AUC %.4f\n", to_string(a.kind).c_str(), a.forward.auc,
                a.reversed.auc);
  }
  std::cout << "report written to " << c.output_dir << '\n';
  return 0;
}

int cmd_sweep(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f);
  if (c.sweep.empty()) fail_config("sweep: configuration has no 'sweep' section");
  const auto reports = run_sweep(c);
  std::cout << reports.size() << " experiments, summary at " << (fs::path(c.output_dir) / "summary.csv").string()
            << '\n';
  return 0;
}

int cmd_dp_bound(const std::vector<double>& eps) {
  std::printf("epsilon,ba_bound,refined_ba_bound\n");
  for (double e : eps) {
    const DpBound b = dp_ba_bound(e);
    std::printf("%.17g,%.17g,%.17g\n", b.epsilon, b.ba_bound, b.refined_ba_bound);
  }
  return 0;
}

int cmd_summarize(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<ExperimentReport> reports;
  for (const auto& in : inputs) {
    std::vector<fs::path> files;
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
    } else {
      files.emplace_back(in);
    }
    for (const auto& p : files) reports.push_back(report_from_json(read_json_file(p.string())));
  }
  if (reports.empty()) fail_config("summarize: no report.json found");
  emit_summary(reports, out);
  std::cout << reports.size() << " reports summarized into " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfmia: membership inference audits of algorithmic recourse"};
  app.require_subcommand(1);

  CommonFlags gen, train, rec, att, run, sweep;
  std::string game_path;
  auto* c_gen = app.add_subcommand("gen-data", "generate or load, standardize and export the dataset");
  add_common(c_gen, gen);
  auto* c_train = app.add_subcommand("train", "train the owner model (and VAE for cchvae)");
  add_common(c_train, train);
  auto* c_rec = app.add_subcommand("recourse", "play the membership game and record one recourse per point");
  add_common(c_rec, rec);
  auto* c_att = app.add_subcommand("attack", "score a recorded game with every configured attack");
  add_common(c_att, att);
  c_att->add_option("--game", game_path, "game.json from the recourse stage (default <out>/game.json)");
  auto* c_run = app.add_subcommand("run", "full pipeline");
  add_common(c_run, run);
  auto* c_sweep = app.add_subcommand("sweep", "run the cartesian product of the config's sweep axes");
  add_common(c_sweep, sweep);

  std::vector<double> eps;
  auto* c_dp = app.add_subcommand("dp-bound", "balanced-accuracy bound for an epsilon-DP recourse");
  c_dp->add_option("--epsilon", eps, "privacy parameter(s)")->required();

  std::vector<std::string> inputs;
  std::string summary_out = "summary.csv";
  auto* c_sum = app.add_subcommand("summarize", "merge report.json files into one summary CSV");
  c_sum->add_option("reports", inputs, "report.json files or directories")->required();
  c_sum->add_option("--out", summary_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*c_gen) return cmd_gen_data(gen);
    if (*c_train) return cmd_train(train);
    if (*c_rec) return cmd_recourse(rec);
    if (*c_att) return cmd_attack(att, game_path);
    if (*c_run) return cmd_run(run);
    if (*c_sweep) return cmd_sweep(sweep);
    if (*c_dp) return cmd_dp_bound(eps);
    if (*c_sum) return cmd_summarize(inputs, summary_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
