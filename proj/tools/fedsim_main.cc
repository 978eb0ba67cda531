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

// Command-line front end: `fedsim run <config>` and `fedsim bound <config>`.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedsim/config.h"
#include "fedsim/experiment.h"

namespace {

absl::StatusOr<fedsim::ExperimentConfig> LoadConfig(const std::string& path) {
  auto file = fedsim::ConfigFile::Load(path);
  if (!file.ok()) return file.status();
  file->ApplyEnvironment(fedsim::ConfigFile::ProcessEnvironment());
  return fedsim::BuildExperimentConfig(*file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "Experiment config file")
        ->required();
    cmd->add_option("--seed", seed, "Base seed (overrides train.seed)");
    cmd->add_option("--out-dir", out_dir,
                    "Output directory (overrides experiment.out_dir)");
    cmd->add_option("--jobs", jobs, "Sweep cells to run in parallel")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* run = app.add_subcommand("run", "Run a training experiment");
  add_common(run);
  CLI::App* bound =
      app.add_subcommand("bound", "Write the E/M convergence-bound report");
  add_common(bound);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto config = LoadConfig(config_path);
  if (!config.ok()) {
    std::cerr << "error: " << config.status().message() << "\n";
    return fedsim::ExitCodeFor(config.status());
  }
  fedsim::ExperimentOptions options;
  options.jobs = jobs;
  options.seed = seed;
  options.out_dir = out_dir;

  absl::Status status;
  if (run->parsed()) {
    status = fedsim::RunExperiment(*config, options, std::cout);
  } else {
    status = fedsim::RunBoundReport(*config, options, std::cout).status();
  }
  if (!status.ok()) {
    std::cerr << "error: " << status.message() << "\n";
    return fedsim::ExitCodeFor(status);
  }
  return 0;
}
