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

#ifndef FEDSIM_ANALYSIS_H_
#define FEDSIM_ANALYSIS_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/dataset.h"
#include "fedsim/model.h"

namespace fedsim {

// Run-level quantities entering the convergence bound besides the problem
// constants.
struct BoundSetting {
  int64_t local_steps = 1;      // E
  int64_t participants = 1;     // M
  int64_t num_devices = 1;      // N
  int64_t total_iterations = 1; // T
  double q = 0.0;               // compressor loss factor
  double initial_dist_sq = 0.0; // E||x_0 - x*||^2
  int64_t samples_per_device = 1;  // |D_i| = n_k
  // Privacy term is omitted entirely when unset.
  std::optional<double> epsilon;
  double delta = 1e-4;
};

struct BoundTerms {
  // initial distance, compression, variance + heterogeneity,
  // heterogeneity drift, local-step drift, privacy noise.
  std::array<double, 6> terms{};
  double total = 0.0;
};

// Six-term upper bound on E||x_K - x*||^2 for the privatized, quantized
// local-SGD scheme under the theoretical learning-rate schedule:
//
//   16 E^2 / T^2 * dist0
//   + 16 / mu^2 (2 q G^2 / M + q G^2 / N) E / T
//   + 16 / mu^2 (4 e sigma^2 / (b M) + 3 L lambda^2 / mu + sigma^2 / (b N)) / T
//   + 128 e lambda^2 / (mu^2 M) (E - 1) / T
//   + 128 G^2 / mu^2 (E - 1)^2 / T
//   + 4096 d G^2 b^2 (1 + q) ln(1.25 E b / (n_k delta)) / (M n_k^2 eps^2)
//       * E^3 / T
//
// e is Euler's number. q > 1 is accepted (it happens for coarse quantizers).
absl::StatusOr<BoundTerms> ConvergenceBound(const ProblemConstants& constants,
                                         const BoundSetting& setting);

// Uplink budget: B = capacity * duration bits shared by K rounds of M
// updates of beta bits each.
struct CommBudget {
  double capacity_bps = 0.0;
  double duration_sec = 0.0;
  double beta_bits = 0.0;

  double total_bits() const { return capacity_bps * duration_sec; }
  // alpha = B / (T beta): participants affordable per local step.
  double alpha(int64_t total_iterations) const {
    return total_bits() / (static_cast<double>(total_iterations) * beta_bits);
  }
};

struct BudgetStatus {
  bool feasible = false;
  double slack = 0.0;  // B - K M beta
};

BudgetStatus BudgetCheck(int64_t rounds, int64_t participants, double beta,
                         double budget_bits);

struct TradeoffRow {
  int64_t local_steps = 0;   // E
  int64_t participants = 0;  // M = min(floor(alpha E), N)
  int64_t rounds = 0;        // K = floor(T / E)
  BoundTerms bound;
  bool feasible = false;
};

struct TradeoffReport {
  double alpha = 0.0;
  std::vector<TradeoffRow> rows;
  // Index into rows of the smallest feasible bound; unset if none.
  std::optional<size_t> minimizer;
};

// For fixed beta and B, walks E = 1..max_local_steps with M = floor(alpha E)
// capped at N and evaluates the bound per pair. Rows with M = 0 are reported
// infeasible. `setting.local_steps` and `setting.participants` are ignored.
absl::StatusOr<TradeoffReport> DominantTradeoff(
    const ProblemConstants& constants, const BoundSetting& setting,
    const CommBudget& budget, int64_t max_local_steps);

// Pointwise heterogeneity estimate at x (see GradientDissimilarity).
absl::StatusOr<double> HeterogeneityLambda(
    const ModelShape& shape, const Dataset& data,
    std::span<const DevicePartition> partitions,
    std::span<const double> params, double mu);

}  // namespace fedsim

#endif  // FEDSIM_ANALYSIS_H_
