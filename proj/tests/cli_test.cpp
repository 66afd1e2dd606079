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

// Drives the installed command-line tool end to end.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace cfmia {
namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(CFMIA_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path write_config(const std::filesystem::path& dir) {
  const auto path = dir / "config.json";
  std::ofstream(path) << R"({
    "id": "cli", "seed": 3,
    "data": {"source": "synthetic", "d": 4, "n_per_class": 200, "class_separation": 0.5},
    "split": {"owner_n": 120, "shadow_n": 160, "eval_out_n": 120},
    "model": {"architecture": [], "train": {"learning_rate": 0.01, "epochs": 20}},
    "recourse": {"algorithm": "scfe", "scfe": {"max_iters": 150}},
    "attack": {"n_shadow": 4},
    "eval": {"per_class": 20}
  })";
  return path;
}

TEST(CliTest, DpBoundPrintsCsv) {
  const Outcome r = run_cli("dp-bound --epsilon 0 1");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string header, zero, one;
  std::getline(in, header);
  std::getline(in, zero);
  std::getline(in, one);
  EXPECT_EQ(header, "epsilon,ba_bound,refined_ba_bound");
  EXPECT_EQ(zero.substr(0, 2), "0,");
  double e, ba, refined;
  ASSERT_EQ(std::sscanf(one.c_str(), "%lf,%lf,%lf", &e, &ba, &refined), 3);
  EXPECT_NEAR(ba, 1.0 - std::exp(-1.0) / 2.0, 1e-12);
  EXPECT_NEAR(refined, 0.5 + (2.0 - std::exp(-1.0)) * (1.0 - std::exp(-1.0)) / 4.0, 1e-12);
  EXPECT_LE(refined, ba);
}

TEST(CliTest, ConfigProblemsExitWithOne) {
  const auto dir = testing::scratch_dir("cli_bad");
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()).code, 1);
  std::ofstream(dir / "bad.json") << R"({"sed": 3})";
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string()).code, 1);
  EXPECT_EQ(run_cli("no-such-command").code, 1);
  EXPECT_EQ(run_cli("dp-bound --epsilon -1").code, 1);
}

TEST(CliTest, StagedPipelineMatchesRun) {
  const auto dir = testing::scratch_dir("cli_run");
  const auto cfg = write_config(dir).string();
  const std::string full = (dir / "full").string(), staged = (dir / "staged").string();
  ASSERT_EQ(run_cli("run --config " + cfg + " --out " + full).code, 0);
  for (const char* f : {"report.json", "scores.jsonl", "summary.csv", "roc_cfd_forward.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "full" / f)) << f;
  }
  for (const char* stage : {"gen-data", "train", "recourse", "attack"}) {
    ASSERT_EQ(run_cli(std::string(stage) + " --config " + cfg + " --out " + staged).code, 0) << stage;
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "staged" / "data.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "staged" / "game.json"));
  EXPECT_EQ(testing::read_file(dir / "full" / "scores.jsonl"), testing::read_file(dir / "staged" / "scores.jsonl"));

  const std::string merged = (dir / "merged.csv").string();
  ASSERT_EQ(run_cli("summarize " + full + " " + staged + " --out " + merged).code, 0);
  const std::string s = testing::read_file(merged);
  EXPECT_EQ(s.substr(0, s.find('\n')), "experiment_id,attack,direction,auc,ba,tpr_at_0.1,tpr_at_0.01");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 2 * 4 * 2);
}

TEST(CliTest, SweepWithoutAxesIsConfigError) {
  const auto dir = testing::scratch_dir("cli_sweep");
  EXPECT_EQ(run_cli("sweep --config " + write_config(dir).string()).code, 1);
}

}  // namespace
}  // namespace cfmia
