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

#ifndef FEDSIM_CONFIG_H_
#define FEDSIM_CONFIG_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/federation.h"

namespace fedsim {

// Flat configuration file of `section.key = value` lines. `#` starts a
// comment; blank lines are ignored. Keys are case-insensitive and stored
// lower-cased. Later assignments override earlier ones.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    // 1-based source line; 0 for values set programmatically or from the
    // environment.
    int line = 0;
    std::string origin;
  };

  static absl::StatusOr<ConfigFile> Parse(absl::string_view text,
                                          absl::string_view origin = "config");
  static absl::StatusOr<ConfigFile> Load(const std::string& path);

  // Applies FEDSIM_<SECTION>_<KEY>=value overrides from name/value pairs.
  void ApplyEnvironment(
      const std::vector<std::pair<std::string, std::string>>& environment);
  static std::vector<std::pair<std::string, std::string>> ProcessEnvironment();

  void Set(absl::string_view key, std::string value);
  const Entry* Find(absl::string_view key) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

struct DatasetManifest {
  enum class Source { kSynthetic, kIdx };
  Source source = Source::kSynthetic;
  // Synthetic clusters.
  int64_t n = 10000;
  int64_t u = 20;
  int classes = 10;
  double separation = 3.0;
  int64_t test_n = 2000;
  // IDX files; test files are optional.
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  uint64_t seed = 1;
  int labels_per_device = 2;
  std::optional<uint64_t> partition_seed;
  bool bias = true;
};

// Optional analysis inputs for the `bound` command.
struct BoundOptions {
  double capacity_bps = 1e6;
  double duration_sec = 1.0;
  std::optional<double> budget_bits;
  std::optional<int64_t> total_iterations;
  std::optional<int64_t> max_local_steps;
  // Replace the empirical estimates when set.
  std::optional<double> L, sigma_grad, lambda_het, G;
};

struct ExperimentConfig {
  RunConfig run;
  DatasetManifest dataset;
  BoundOptions bound;
  std::string out_dir = "out";
  std::optional<std::string> sweep_key;
  std::vector<std::string> sweep_values;
  int repeats = 1;
  double reference_tol = 1e-10;
};

// Builds a typed experiment description. Errors name the offending key and
// its source line.
absl::StatusOr<ExperimentConfig> BuildExperimentConfig(const ConfigFile& file);

// Sets one run or privacy field (`federation.*`, `train.*`, `privacy.*`).
// Used for sweep cells.
absl::Status ApplyRunSetting(ExperimentConfig& config, absl::string_view key,
                             absl::string_view value);

}  // namespace fedsim

#endif  // FEDSIM_CONFIG_H_
