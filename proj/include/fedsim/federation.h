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

#ifndef FEDSIM_FEDERATION_H_
#define FEDSIM_FEDERATION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/dataset.h"
#include "fedsim/model.h"
#include "fedsim/privacy.h"

namespace fedsim {

enum class Algorithm { kDistSgd, kFedAvg, kFedPaq, kDpFedPaq, kScaffold };
enum class LrMode { kExperimental, kTheoretical };
// How local mini-batches are drawn. dp_fedpaq always uses kSubsample.
enum class BatchSampling {
  // b indices uniformly with replacement from the partition at every step.
  kWithReplacement,
  // One E*b sample without replacement per round, consumed b at a time.
  kSubsample,
};

absl::StatusOr<Algorithm> ParseAlgorithm(absl::string_view name);
absl::string_view AlgorithmName(Algorithm algorithm);

struct PrivacyConfig {
  double epsilon = 1.0;
  double delta = 1e-4;
  double clip = 1.0;
  // When set, the batch size is derived as gamma * n_k / E.
  std::optional<double> gamma;
  SensitivityMode sensitivity = SensitivityMode::Derived();
  // Replaces the calibrated variance (ablations; 0 disables noise).
  std::optional<double> sigma_sq_override;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::kFedPaq;
  int num_devices = 100;
  int participants = 10;
  int local_steps = 10;
  int64_t rounds = 100;
  // When set, rounds = floor(total_iterations / local_steps).
  std::optional<int64_t> total_iterations;
  int64_t batch_size = 10;
  // Quantization level s; nullopt sends updates uncompressed.
  std::optional<int> level = 10;
  double eta0 = 0.1;
  LrMode lr_mode = LrMode::kExperimental;
  double mu = 0.01;
  double eta_g = 1.0;
  std::optional<PrivacyConfig> privacy;
  uint64_t seed = 1;
  BatchSampling batch_sampling = BatchSampling::kWithReplacement;

  // Applies the per-algorithm constraints (dist_sgd: E = 1, M = N, no
  // quantization; fedavg and scaffold: no quantization; privacy only for
  // dp_fedpaq; dp_fedpaq: eta_g = 1) and resolves rounds from
  // total_iterations. Fails on inconsistent values.
  absl::StatusOr<RunConfig> Normalized() const;
};

// Per-device SCAFFOLD control variates.
struct ControlVariates {
  std::vector<double> global;
  std::vector<std::vector<double>> local;

  static ControlVariates Zeros(int num_devices, size_t dim) {
    return {std::vector<double>(dim, 0.0),
            std::vector<std::vector<double>>(num_devices,
                                             std::vector<double>(dim, 0.0))};
  }
};

struct RoundRecord {
  int64_t round = 0;
  int64_t iteration = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double dist_sq_to_opt = 0.0;
  int64_t bits_round = 0;
  int64_t bits_cumulative = 0;
  double eps_prime = 0.0;
  double sigma_sq = 0.0;
};

// Training data shared by all devices plus the per-device split.
struct FederatedData {
  ModelShape shape;
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  std::vector<DevicePartition> partitions;
};

// Participating devices for round k, in increasing id order: M of N uniformly
// without replacement from the (seed, k) stream; all devices when M == N.
std::vector<int> Schedule(int num_devices, int participants, int64_t round,
                          uint64_t seed);

// experimental: eta0 / (1 + k E / 100); theoretical: 4 / (mu (k E + 4 E)).
absl::StatusOr<double> LearningRate(int64_t round, const RunConfig& config);

struct LocalUpdate {
  std::vector<double> delta;
  // SCAFFOLD only: new local control variate minus the old one.
  std::vector<double> control_delta;
  double sigma_sq = 0.0;
  double eps_prime = 0.0;
};

// Mini-batch size used by a device. For dp_fedpaq with a configured gamma
// this is floor(gamma * n_min / E) over the given partitions.
absl::StatusOr<int64_t> EffectiveBatchSize(
    const RunConfig& config, std::span<const DevicePartition> partitions);

// E local steps on one device starting from x_k, returning y_E - x_k (the
// un-quantized update). Expects a normalized config. `batch_size` comes from
// EffectiveBatchSize. `variates` is required for scaffold.
absl::StatusOr<LocalUpdate> ComputeLocalUpdate(
    const FederatedData& data, int device, std::span<const double> x,
    const RunConfig& config, int64_t round, double step_size,
    int64_t batch_size, const ControlVariates* variates);

// x + (eta_g / M) * sum(updates), summing in the given order.
absl::StatusOr<std::vector<double>> Aggregate(
    std::span<const double> x, std::span<const std::vector<double>> updates,
    double eta_g);

struct RunResult {
  std::vector<RoundRecord> records;
  ModelState final_state;
};

// Called after each aggregation with the 1-based round and the new model.
using RoundObserver =
    std::function<void(int64_t round, std::span<const double> params)>;

// Executes the configured number of rounds from x_0 = 0. `reference` is x*
// for the distance column (NaN when empty). Fully determined by config.seed.
absl::StatusOr<RunResult> Run(const RunConfig& config,
                              const FederatedData& data,
                              std::span<const double> reference = {},
                              const RoundObserver& observer = nullptr);

}  // namespace fedsim

#endif  // FEDSIM_FEDERATION_H_
