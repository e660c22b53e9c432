// Copyright 2026 The noe Authors
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


// Runs the noe binary as a subprocess.

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int status = -1;
  std::string out;  // stdout and stderr
};

Result Noe(const std::string& args) {
  const std::string cmd = std::string(NOE_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("noe_cli_" + tag);
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& f) const { return (path_ / f).string(); }

 private:
  fs::path path_;
};

json TinyRunConfig() {
  return {
      {"seed", 3},
      {"backbone", "backbone.noe"},
      {"model",
       {{"d_model", 16}, {"d_ff", 24}, {"n_layers", 1}, {"n_heads", 2},
        {"vocab_size", 32}, {"context_length", 12}, {"n_pt", 2}, {"K", 3},
        {"r", 2}, {"r_c", 0}, {"alpha", 0.5}}},
      {"plan",
       {{"variant", "noesis_pt"}, {"eta", 1e-2}, {"warmup_steps", 2},
        {"epochs_stage1", 1}, {"epochs_stage2", 1}, {"batch_stage1", 4},
        {"batch_stage2", 4}, {"eval_every", 1}}},
      {"privacy", {{"epsilon", 8.0}, {"delta", 1e-3}, {"clip_norm", 1.0}}}};
}

void WriteJson(const std::string& path, const json& j) {
  std::ofstream(path) << j.dump(2) << "\n";
}

TEST(Cli, VersionPrintsBuildAndFormat) {
  const Result r = Noe("--version");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("noe ", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("checkpoint format 1"), std::string::npos) << r.out;
}

TEST(Cli, CalibratePrintsGoldenSigma) {
  const Result r = Noe(
      "calibrate --epsilon 1.0 --delta 1e-4 --batch 24 --dataset-size 2480 "
      "--steps 1248");
  ASSERT_EQ(r.status, 0) << r.out;
  const json rec = json::parse(r.out);
  EXPECT_NEAR(rec.at("sigma").get<double>(), 1.713841, 5e-6);
  EXPECT_EQ(rec.at("steps"), 1248);
}

TEST(Cli, NegativeEpsilonExitsOneNamingField) {
  TempDir dir("bad_eps");
  json cfg = TinyRunConfig();
  cfg["privacy"]["epsilon"] = -1;
  WriteJson(dir / "bad.json", cfg);
  const Result r = Noe("train --config " + (dir / "bad.json") + " --corpus " +
                       (dir / "missing.jsonl") + " --out " + (dir / "out"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("privacy.epsilon"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, UsageAndRuntimeExitCodes) {
  EXPECT_EQ(Noe("").status, 1);
  EXPECT_EQ(Noe("no-such-command").status, 1);
  EXPECT_EQ(Noe("calibrate --epsilon 1").status, 1);
  // Unreachable budget is a runtime failure.
  EXPECT_EQ(Noe("calibrate --epsilon 1e-9 --delta 1e-9 --batch 2480 "
                "--dataset-size 2480 --steps 100000")
                .status,
            2);
  EXPECT_EQ(Noe("eval --checkpoint /nonexistent.noe --corpus /nonexistent.jsonl")
                .status,
            2);
}

// gen-corpus -> pretrain -> calibrate -> train -> eval, twice.
class Quickstart : public ::testing::Test {
 protected:
  static std::string RunQuickstart(const TempDir& dir) {
    WriteJson(dir / "run.json", TinyRunConfig());
    const std::string common = "--threads 1 --seed 3 ";
    Result r = Noe(common + "gen-corpus --out " + (dir / "data") +
                   " --docs-per-domain 32,16,8 --shared-keywords 6"
                   " --private-keywords 6 --vocab 32 --min-tokens 8"
                   " --max-tokens 16 --public-docs 64");
    EXPECT_EQ(r.status, 0) << r.out;
    r = Noe(common + "pretrain --corpus " + (dir / "data/public.jsonl") +
            " --config " + (dir / "run.json") + " --out " + (dir / "backbone.noe") +
            " --steps 20 --batch 8");
    EXPECT_EQ(r.status, 0) << r.out;
    r = Noe("calibrate --epsilon 8 --delta 1e-3 --batch 4 --dataset-size 28 --steps 7");
    EXPECT_EQ(r.status, 0) << r.out;
    r = Noe(common + "train --config " + (dir / "run.json") + " --corpus " +
            (dir / "data/corpus.jsonl") + " --out " + (dir / "run"));
    EXPECT_EQ(r.status, 0) << r.out;
    r = Noe(common + "eval --checkpoint " + (dir / "run/final.noe") + " --corpus " +
            (dir / "data/corpus.jsonl") + " --out " + (dir / "run"));
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "run/eval_report.json"));
    return ReadFile(dir / "run/summary.json");
  }
};

TEST_F(Quickstart, SummaryIsReproducible) {
  TempDir a("quickstart_a");
  TempDir b("quickstart_b");
  const std::string sa = RunQuickstart(a);
  const std::string sb = RunQuickstart(b);
  ASSERT_FALSE(sa.empty());
  EXPECT_EQ(sa, sb);
  const json s = json::parse(sa);
  EXPECT_EQ(s.at("variant"), "noesis_pt");
  EXPECT_FALSE(s.contains("wall_clock_seconds"));
  const json m = json::parse(ReadFile(a / "run/manifest.json"));
  EXPECT_TRUE(m.contains("wall_clock_seconds"));
}

TEST(Cli, ExportWritesDeployableSections) {
  TempDir dir("export");
  WriteJson(dir / "run.json", TinyRunConfig());
  ASSERT_EQ(Noe("--seed 1 gen-corpus --out " + (dir / "data") +
                " --docs-per-domain 16,8,8 --shared-keywords 6"
                " --private-keywords 6 --vocab 32 --min-tokens 8"
                " --max-tokens 16 --public-docs 32")
                .status,
            0);
  ASSERT_EQ(Noe("pretrain --corpus " + (dir / "data/public.jsonl") + " --config " +
                (dir / "run.json") + " --out " + (dir / "backbone.noe") +
                " --steps 2 --batch 4")
                .status,
            0);
  ASSERT_EQ(Noe("train --config " + (dir / "run.json") + " --corpus " +
                (dir / "data/corpus.jsonl") + " --out " + (dir / "run"))
                .status,
            0);
  const Result r = Noe("export --checkpoint " + (dir / "run/final.noe") +
                       " --domain 1 --out " + (dir / "m1.noe"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("backbone/"), std::string::npos);
  EXPECT_NE(r.out.find("prompts/P"), std::string::npos);
  EXPECT_EQ(r.out.find("expert/"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "m1.noe"));

  const Result bad = Noe("export --checkpoint " + (dir / "run/final.noe") +
                         " --domain 7 --out " + (dir / "m7.noe"));
  EXPECT_EQ(bad.status, 1) << bad.out;

  const Result ab = Noe("ablate --checkpoint " + (dir / "run/final.noe") +
                        " --surgery remove_shared_prompts --out " + (dir / "np.noe"));
  EXPECT_EQ(ab.status, 0) << ab.out;
  const Result twice = Noe("ablate --checkpoint " + (dir / "np.noe") +
                           " --surgery remove_domain_experts --out " +
                           (dir / "np2.noe"));
  EXPECT_EQ(twice.status, 1) << twice.out;
}

}  // namespace
