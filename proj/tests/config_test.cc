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

#include "fedsim/config.h"

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace fedsim {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

constexpr char kConfig[] = R"(
# federated run
federation.algorithm = dp_fedpaq
federation.N = 50
federation.M = 5

train.E = 4      # local steps
train.K = 30
train.b = 8
train.s = none
train.mu = 0.02
train.lr_mode = theoretical

privacy.epsilon = 0.5
privacy.clip = 2
privacy.sensitivity = 1.5

dataset.source = synthetic
dataset.n = 3000
dataset.labels_per_device = 3
experiment.out_dir = results
)";

TEST(ConfigFileTest, ParsesKeysCaseInsensitively) {
  auto file = ConfigFile::Parse(kConfig, "test.cfg");
  ASSERT_TRUE(file.ok()) << file.status();
  const auto* n = file->Find("FEDERATION.n");
  ASSERT_NE(n, nullptr);
  EXPECT_EQ(n->value, "50");
  EXPECT_EQ(n->line, 4);
  EXPECT_EQ(file->Find("train.e")->value, "4");
  EXPECT_EQ(file->Find("missing.key"), nullptr);
}

TEST(ConfigFileTest, MalformedLinesReportLineNumber) {
  auto no_eq = ConfigFile::Parse("train.e = 1\n\ntrain.k 5\n", "bad.cfg");
  EXPECT_EQ(no_eq.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_THAT(no_eq.status().message(), HasSubstr("bad.cfg:3"));
  auto no_section = ConfigFile::Parse("eta = 1\n", "bad.cfg");
  EXPECT_THAT(no_section.status().message(), HasSubstr("bad.cfg:1"));
}

TEST(ConfigFileTest, EnvironmentOverrides) {
  auto file = ConfigFile::Parse(kConfig, "test.cfg");
  file->ApplyEnvironment({{"FEDSIM_TRAIN_E", "7"},
                          {"FEDSIM_PRIVACY_SIGMA_SQ", "0"},
                          {"HOME", "/root"},
                          {"FEDSIM_BROKEN", "1"}});
  EXPECT_EQ(file->Find("train.e")->value, "7");
  EXPECT_EQ(file->Find("train.e")->line, 0);
  EXPECT_EQ(file->Find("privacy.sigma_sq")->value, "0");
  EXPECT_EQ(file->entries().count("home"), 0u);
  auto config = BuildExperimentConfig(*file);
  ASSERT_TRUE(config.ok()) << config.status();
  EXPECT_EQ(config->run.local_steps, 7);
  EXPECT_EQ(config->run.privacy->sigma_sq_override, 0.0);
}

TEST(BuildConfigTest, TypedFields) {
  auto config = BuildExperimentConfig(*ConfigFile::Parse(kConfig));
  ASSERT_TRUE(config.ok()) << config.status();
  const RunConfig& run = config->run;
  EXPECT_EQ(run.algorithm, Algorithm::kDpFedPaq);
  EXPECT_EQ(run.num_devices, 50);
  EXPECT_EQ(run.participants, 5);
  EXPECT_EQ(run.local_steps, 4);
  EXPECT_EQ(run.rounds, 30);
  EXPECT_EQ(run.batch_size, 8);
  EXPECT_FALSE(run.level.has_value());
  EXPECT_EQ(run.lr_mode, LrMode::kTheoretical);
  ASSERT_TRUE(run.privacy.has_value());
  EXPECT_EQ(run.privacy->epsilon, 0.5);
  EXPECT_EQ(run.privacy->clip, 2.0);
  EXPECT_EQ(run.privacy->sensitivity.kind, SensitivityMode::Kind::kFixed);
  EXPECT_EQ(run.privacy->sensitivity.fixed_value, 1.5);
  EXPECT_EQ(run.privacy->gamma, 0.2);
  EXPECT_EQ(config->dataset.n, 3000);
  EXPECT_EQ(config->dataset.labels_per_device, 3);
  EXPECT_EQ(config->out_dir, "results");
}

TEST(BuildConfigTest, DefaultsMirrorReferenceSetup) {
  auto config = BuildExperimentConfig(*ConfigFile::Parse(""));
  ASSERT_TRUE(config.ok());
  const RunConfig& run = config->run;
  EXPECT_EQ(run.num_devices, 100);
  EXPECT_EQ(run.participants, 10);
  EXPECT_EQ(run.local_steps, 10);
  EXPECT_EQ(run.rounds, 100);
  EXPECT_EQ(run.level, 10);
  EXPECT_EQ(run.eta0, 0.1);
  EXPECT_EQ(config->repeats, 1);
}

TEST(BuildConfigTest, ErrorsCarryLine) {
  auto bad_value = BuildExperimentConfig(
      *ConfigFile::Parse("train.e = 3\ntrain.b = ten\n", "x.cfg"));
  EXPECT_EQ(bad_value.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_THAT(bad_value.status().message(), HasSubstr("x.cfg:2"));
  auto unknown =
      BuildExperimentConfig(*ConfigFile::Parse("\ntrain.speed = 3\n", "x.cfg"));
  EXPECT_THAT(unknown.status().message(), HasSubstr("x.cfg:2"));
  EXPECT_THAT(unknown.status().message(), HasSubstr("train.speed"));
  auto algo = BuildExperimentConfig(
      *ConfigFile::Parse("federation.algorithm = sgd\n", "x.cfg"));
  EXPECT_THAT(algo.status().message(), HasSubstr("x.cfg:1"));
  auto both = BuildExperimentConfig(
      *ConfigFile::Parse("train.k = 3\ntrain.t = 30\n", "x.cfg"));
  EXPECT_FALSE(both.ok());
  auto repeats = BuildExperimentConfig(
      *ConfigFile::Parse("experiment.repeats = 0\n", "x.cfg"));
  EXPECT_FALSE(repeats.ok());
  auto inconsistent = BuildExperimentConfig(
      *ConfigFile::Parse("federation.n = 5\nfederation.m = 6\n", "x.cfg"));
  EXPECT_FALSE(inconsistent.ok());
}

TEST(BuildConfigTest, SweepValidation) {
  auto ok = BuildExperimentConfig(*ConfigFile::Parse(
      "experiment.sweep = train.E\nexperiment.values = 1, 5, 10\n"
      "experiment.repeats = 3\n"));
  ASSERT_TRUE(ok.ok()) << ok.status();
  EXPECT_EQ(ok->sweep_key, "train.e");
  EXPECT_THAT(ok->sweep_values, ElementsAre("1", "5", "10"));
  EXPECT_EQ(ok->repeats, 3);
  auto bad_value = BuildExperimentConfig(*ConfigFile::Parse(
      "experiment.sweep = train.E\nexperiment.values = 1, x\n", "s.cfg"));
  EXPECT_THAT(bad_value.status().message(), HasSubstr("s.cfg:1"));
  auto bad_key = BuildExperimentConfig(*ConfigFile::Parse(
      "experiment.sweep = dataset.n\nexperiment.values = 1\n"));
  EXPECT_FALSE(bad_key.ok());
  auto no_values = BuildExperimentConfig(
      *ConfigFile::Parse("experiment.sweep = train.e\n"));
  EXPECT_FALSE(no_values.ok());
}

TEST(BuildConfigTest, ApplyRunSetting) {
  auto config = *BuildExperimentConfig(*ConfigFile::Parse(""));
  ASSERT_TRUE(ApplyRunSetting(config, "train.s", "none").ok());
  EXPECT_FALSE(config.run.level.has_value());
  ASSERT_TRUE(ApplyRunSetting(config, "TRAIN.E", "20").ok());
  EXPECT_EQ(config.run.local_steps, 20);
  EXPECT_FALSE(ApplyRunSetting(config, "dataset.n", "5").ok());
}

TEST(ConfigFileTest, LoadMissingFile) {
  EXPECT_EQ(ConfigFile::Load("/nonexistent/fedsim.cfg").status().code(),
            absl::StatusCode::kNotFound);
}

}  // namespace
}  // namespace fedsim
