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

#ifndef FEDSIM_EXPERIMENT_H_
#define FEDSIM_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/analysis.h"
#include "fedsim/config.h"
#include "fedsim/federation.h"

namespace fedsim {

inline constexpr char kRunCsvHeader[] =
    "round,iteration,train_loss,test_acc,dist_sq_to_opt,bits_round,bits_cum,"
    "eps_prime,sigma_sq";
inline constexpr char kBoundCsvHeader[] =
    "E,M,K,bound_total,term1,term2,term3,term4,term5,term6,feasible";

// Train/test data materialized from a manifest.
struct PreparedData {
  Dataset train;
  std::optional<Dataset> test;
  ModelShape shape;
};

absl::StatusOr<PreparedData> PrepareData(const DatasetManifest& manifest);

absl::StatusOr<std::vector<DevicePartition>> PartitionFor(
    const PreparedData& data, const DatasetManifest& manifest,
    int num_devices);

// One CSV row, reals with 12 significant digits.
std::string FormatRecord(const RoundRecord& record);
std::string FormatRunCsv(const std::vector<RoundRecord>& records);
std::string FormatBoundCsv(const TradeoffReport& report);

struct ExperimentOptions {
  int jobs = 1;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
};

// Runs every (sweep value, repeat) cell and writes one CSV per cell plus
// manifest.csv (written last). Repeat r uses seed base + r.
absl::Status RunExperiment(const ExperimentConfig& config,
                           const ExperimentOptions& options,
                           std::ostream& log);

// Estimates constants on the configured data, evaluates the E/M trade-off
// under the configured budget and writes bound.csv.
absl::StatusOr<TradeoffReport> RunBoundReport(const ExperimentConfig& config,
                                              const ExperimentOptions& options,
                                              std::ostream& log);

// Maps a status to the CLI exit code: 2 for configuration and input errors,
// 3 for aborted (non-finite) runs, 1 otherwise.
int ExitCodeFor(const absl::Status& status);

}  // namespace fedsim

#endif  // FEDSIM_EXPERIMENT_H_
