// Copyright 2026 The zorefine Authors.
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

#include "commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zorefine/csv.hpp"

namespace zorefine::cli {
namespace {

namespace fs = std::filesystem;

// Small problem so every subcommand finishes in well under a second.
const std::vector<std::string> kSmall{
    "--set", "objective.dataset.n=120",     "--set", "objective.mlp.hidden=[8,8,8]",
    "--set", "fo.steps=20",                 "--set", "zo.steps=5",
    "--set", "sensitivity.m=2",             "--set", "eval.n_repeats=2",
    "--set", "eval.gap_samples=4",          "--set", "sensitivity.n_trials=2"};

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "zorefine_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(const std::string& command, const fs::path& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"zorefine", command, "--out", dir.string()};
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  args.insert(args.end(), extra.begin(), extra.end());
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(split_csv_line(line));
  return rows;
}

TEST(Cli, AlignIsByteDeterministicAndTracesEveryStep) {
  const fs::path a = fresh_dir("align_a");
  const fs::path b = fresh_dir("align_b");
  ASSERT_EQ(cli("align", a, {"--seed", "3"}).code, kExitOk);
  ASSERT_EQ(cli("align", b, {"--seed", "3", "--threads", "1"}).code, kExitOk);
  EXPECT_EQ(slurp(a / "fo_loss_trace.csv"), slurp(b / "fo_loss_trace.csv"));
  EXPECT_EQ(slurp(a / "stage1.bin"), slurp(b / "stage1.bin"));
  const auto rows = read_csv(a / "fo_loss_trace.csv");
  ASSERT_EQ(rows.size(), 21u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"step", "lr", "loss"}));
}

TEST(Cli, StagesChainThroughTheOutputDirectory) {
  const fs::path dir = fresh_dir("stages");
  ASSERT_EQ(cli("align", dir).code, kExitOk);
  ASSERT_EQ(cli("sensitivity", dir).code, kExitOk);
  const auto rows = read_csv(dir / "sensitivity.csv");
  ASSERT_EQ(rows.size(), 5u);  // header + four layers
  int selected = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) selected += rows[i].back() == "1";
  EXPECT_EQ(selected, 2);
  ASSERT_EQ(cli("refine", dir).code, kExitOk);
  EXPECT_EQ(read_csv(dir / "zo_loss_trace.csv").size(), 6u);
  ASSERT_EQ(cli("eval", dir).code, kExitOk);
  const auto eval_a = slurp(dir / "robustness.csv");
  ASSERT_EQ(cli("eval", dir).code, kExitOk);
  EXPECT_EQ(slurp(dir / "robustness.csv"), eval_a);
}

TEST(Cli, EmptySelectionIsAConfigError) {
  const fs::path dir = fresh_dir("empty_selection");
  ASSERT_EQ(cli("align", dir).code, kExitOk);
  std::ofstream(dir / "selection.json") << R"({"layers": []})";
  EXPECT_EQ(cli("refine", dir).code, kExitConfig);
}

TEST(Cli, BadConfigurationExitsWithConfigCode) {
  const fs::path dir = fresh_dir("bad_config");
  EXPECT_EQ(cli("align", dir, {"--set", "fo.lr=-1"}).code, kExitConfig);
  EXPECT_EQ(cli("align", dir, {"--set", "fo.nonsense=1"}).code, kExitConfig);
  EXPECT_EQ(cli("align", dir, {"--config", (dir / "missing.json").string()}).code, kExitConfig);
  std::ostringstream out, err;
  EXPECT_EQ(run_cli({"zorefine", "frobnicate"}, out, err), kExitConfig);
}

TEST(Cli, NumericBlowUpExitsWithNumericCode) {
  const fs::path dir = fresh_dir("blow_up");
  // Gradient descent with lr 10 on curvature 4 overflows within a few hundred steps.
  EXPECT_EQ(cli("align", dir,
                {"--set", "objective.kind=quadratic", "--set", "fo.lr=10", "--set",
                 "fo.steps=1000", "--set", "fo.scheduler=constant", "--set", "sensitivity.m=1"})
                .code,
            kExitNumeric);
}

TEST(Cli, VerifyOnlyWritesOneObject) {
  const fs::path dir = fresh_dir("verify");
  const Outcome r = cli("verify", dir, {"--only", "unbiasedness", "--set", "verify.unbiased_samples=10000"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  std::ifstream in(dir / "verify.json");
  const auto doc = nlohmann::json::parse(in);
  ASSERT_EQ(doc.size(), 1u);
  EXPECT_EQ(doc[0]["name"], "unbiasedness");
  EXPECT_EQ(cli("verify", dir, {"--only", "nope"}).code, kExitConfig);
}

TEST(Cli, RunWritesAManifestThatDetectsTampering) {
  const fs::path dir = fresh_dir("run");
  const Outcome r = cli("run", dir);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"config.json", "run_report.json", "robustness.csv", "baseline_robustness.csv",
                        "selection.json", "layer_scores_baselines.csv", "MANIFEST.sha256"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(cli("check-manifest", dir).code, kExitOk);
  std::ofstream(dir / "robustness.csv", std::ios::app) << "tampered\n";
  const Outcome bad = cli("check-manifest", dir);
  EXPECT_EQ(bad.code, kExitVerification);
  EXPECT_NE(bad.err.find("robustness.csv"), std::string::npos);
}

TEST(Cli, RunIsReproducibleFromTheSeed) {
  const fs::path a = fresh_dir("run_a");
  const fs::path b = fresh_dir("run_b");
  ASSERT_EQ(cli("run", a, {"--seed", "9"}).code, kExitOk);
  ASSERT_EQ(cli("run", b, {"--seed", "9"}).code, kExitOk);
  for (const char* f : {"robustness.csv", "sensitivity.csv", "zo_loss_trace.csv", "stage3.bin"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

}  // namespace
}  // namespace zorefine::cli
