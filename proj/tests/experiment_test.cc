/*
 * Copyright 2026 The FedSim Authors
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

#include "fedsim/experiment.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace fedsim {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using ::testing::StartsWith;

constexpr char kSmallRun[] = R"(
federation.algorithm = fedpaq
federation.n = 10
federation.m = 3
train.e = 2
train.k = 5
train.b = 4
train.s = 4
dataset.n = 400
dataset.u = 4
dataset.classes = 4
dataset.test_n = 100
)";

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           absl::StrCat("fedsim_cli_",
                        ::testing::UnitTest::GetInstance()
                            ->current_test_info()
                            ->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path WriteConfig(const std::string& text) {
    const fs::path path = dir_ / "exp.cfg";
    std::ofstream(path) << text;
    return path;
  }

  // Runs the CLI and returns its exit code; stderr lands in stderr_.
  int Cli(const std::string& args, const std::string& env = "") {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = absl::StrCat(env, " ", FEDSIM_CLI_PATH, " ", args,
                                         " > ",
                                         (dir_ / "stdout.txt").string(),
                                         " 2> ", err.string());
    const int raw = std::system(cmd.c_str());
    stderr_ = ReadFile(err);
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  fs::path dir_;
  std::string stderr_;
};

TEST_F(CliTest, ZeroRoundsWritesHeaderOnly) {
  const auto cfg = WriteConfig(absl::StrCat(kSmallRun, "train.k = 0\n"));
  const fs::path out = dir_ / "out";
  ASSERT_EQ(Cli(absl::StrCat("run ", cfg.string(), " --out-dir ", out.string())),
            0)
      << stderr_;
  EXPECT_EQ(ReadFile(out / "run_seed1.csv"),
            absl::StrCat(kRunCsvHeader, "\n"));
  EXPECT_EQ(ReadFile(out / "manifest.csv"),
            "file,sweep_param,sweep_value,seed\nrun_seed1.csv,,,1\n");
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const auto cfg = WriteConfig(kSmallRun);
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(Cli(absl::StrCat("run ", cfg.string(), " --out-dir ", a.string(),
                             " --seed 9")),
            0)
      << stderr_;
  ASSERT_EQ(Cli(absl::StrCat("run ", cfg.string(), " --out-dir ", b.string(),
                             " --seed 9")),
            0);
  const std::string first = ReadFile(a / "run_seed9.csv");
  EXPECT_EQ(first, ReadFile(b / "run_seed9.csv"));
  std::vector<std::string> lines = absl::StrSplit(first, '\n');
  ASSERT_EQ(lines.size(), 7u);  // header, 5 rounds, trailing newline
  EXPECT_EQ(lines[0], kRunCsvHeader);
  EXPECT_THAT(lines[1], StartsWith("1,2,"));
}

TEST_F(CliTest, SweepWritesOneFilePerCell) {
  const auto cfg = WriteConfig(absl::StrCat(
      kSmallRun,
      "train.k = 2\nexperiment.sweep = train.e\n"
      "experiment.values = 1, 5, 10, 20, 50\nexperiment.repeats = 3\n"));
  const fs::path out = dir_ / "sweep";
  ASSERT_EQ(Cli(absl::StrCat("run ", cfg.string(), " --out-dir ", out.string(),
                             " --jobs 2")),
            0)
      << stderr_;
  int csvs = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (entry.path().filename() != "manifest.csv") ++csvs;
  }
  EXPECT_EQ(csvs, 15);
  std::vector<std::string> rows =
      absl::StrSplit(ReadFile(out / "manifest.csv"), '\n', absl::SkipEmpty());
  ASSERT_EQ(rows.size(), 16u);
  EXPECT_EQ(rows[1], "run_train-e_1_seed1.csv,train.e,1,1");
  EXPECT_EQ(rows[15], "run_train-e_50_seed3.csv,train.e,50,3");
  EXPECT_TRUE(fs::exists(out / "run_train-e_20_seed2.csv"));
}

TEST_F(CliTest, EnvironmentOverridesConfig) {
  const auto cfg = WriteConfig(kSmallRun);
  const fs::path out = dir_ / "env";
  const std::string args =
      absl::StrCat("run ", cfg.string(), " --out-dir ", out.string());
  ASSERT_EQ(Cli(args, "FEDSIM_TRAIN_K=3"), 0)
      << stderr_;
  std::vector<std::string> lines = absl::StrSplit(
      ReadFile(out / "run_seed1.csv"), '\n', absl::SkipEmpty());
  EXPECT_EQ(lines.size(), 4u);
}

TEST_F(CliTest, ParseErrorExitsTwoWithLine) {
  const auto cfg = WriteConfig("train.e = 2\ntrain.k five\n");
  EXPECT_EQ(Cli(absl::StrCat("run ", cfg.string())), 2);
  EXPECT_THAT(stderr_, HasSubstr("exp.cfg:2"));
  const auto bad = WriteConfig("train.e = 2\n\n\ntrain.b = -x\n");
  EXPECT_EQ(Cli(absl::StrCat("run ", bad.string())), 2);
  EXPECT_THAT(stderr_, HasSubstr("exp.cfg:4"));
  EXPECT_EQ(Cli("run /nonexistent.cfg"), 2);
  EXPECT_EQ(Cli("frobnicate"), 2);
}

TEST_F(CliTest, DivergenceExitsThree) {
  const auto cfg = WriteConfig(absl::StrCat(
      kSmallRun, "federation.algorithm = fedavg\ntrain.eta0 = 1e300\n"
                 "train.mu = 1\n"));
  EXPECT_EQ(Cli(absl::StrCat("run ", cfg.string(), " --out-dir ",
                             (dir_ / "nan").string())),
            3);
  EXPECT_THAT(stderr_, HasSubstr("device"));
  EXPECT_THAT(stderr_, HasSubstr("round"));
}

TEST_F(CliTest, BoundWritesReport) {
  const auto cfg = WriteConfig(absl::StrCat(
      kSmallRun, "bound.e_max = 6\nbound.t = 100\nbound.budget_bits = 1e7\n"));
  const fs::path out = dir_ / "bound";
  ASSERT_EQ(Cli(absl::StrCat("bound ", cfg.string(), " --out-dir ",
                             out.string())),
            0)
      << stderr_;
  std::vector<std::string> rows =
      absl::StrSplit(ReadFile(out / "bound.csv"), '\n', absl::SkipEmpty());
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], kBoundCsvHeader);
  EXPECT_THAT(rows[1], StartsWith("1,"));
}

TEST(SampleConfigTest, ShippedConfigsBuild) {
  for (const char* name : {"local_steps.cfg", "private.cfg"}) {
    auto file = ConfigFile::Load(absl::StrCat(FEDSIM_CONFIG_DIR, "/", name));
    ASSERT_TRUE(file.ok()) << file.status();
    auto config = BuildExperimentConfig(*file);
    EXPECT_TRUE(config.ok()) << name << ": " << config.status();
  }
}

TEST(FormatTest, RecordColumns) {
  RoundRecord r;
  r.round = 3;
  r.iteration = 30;
  r.train_loss = 0.5;
  r.test_accuracy = 0.75;
  r.dist_sq_to_opt = 1.0 / 3.0;
  r.bits_round = 100;
  r.bits_cumulative = 300;
  r.eps_prime = std::nan("");
  r.sigma_sq = 0.0;
  EXPECT_EQ(FormatRecord(r), "3,30,0.5,0.75,0.333333333333,100,300,nan,0");
}

TEST(ExitCodeTest, Mapping) {
  EXPECT_EQ(ExitCodeFor(absl::InvalidArgumentError("x")), 2);
  EXPECT_EQ(ExitCodeFor(absl::NotFoundError("x")), 2);
  EXPECT_EQ(ExitCodeFor(absl::AbortedError("x")), 3);
  EXPECT_EQ(ExitCodeFor(absl::InternalError("x")), 1);
}

TEST(PrepareDataTest, SyntheticSplit) {
  DatasetManifest m;
  m.n = 300;
  m.u = 3;
  m.classes = 3;
  m.test_n = 50;
  auto data = PrepareData(m);
  ASSERT_TRUE(data.ok()) << data.status();
  EXPECT_EQ(data->train.size(), 300u);
  ASSERT_TRUE(data->test.has_value());
  EXPECT_EQ(data->test->size(), 50u);
  EXPECT_EQ(data->shape.dim(), 3u * 4u);
  m.labels_per_device = 1;
  auto parts = PartitionFor(*data, m, 3);
  ASSERT_TRUE(parts.ok()) << parts.status();
  EXPECT_EQ(parts->size(), 3u);
}

}  // namespace
}  // namespace fedsim
