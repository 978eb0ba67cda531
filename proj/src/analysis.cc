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

#include "fedsim/analysis.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace fedsim {

absl::StatusOr<BoundTerms> ConvergenceBound(const ProblemConstants& c,
                                         const BoundSetting& s) {
  if (auto status = c.Validate(); !status.ok()) return status;
  if (s.local_steps < 1 || s.participants < 1 || s.num_devices < 1 ||
      s.total_iterations < 1 || s.samples_per_device < 1) {
    return absl::InvalidArgumentError(
        "E, M, N, T and n_k must all be at least 1");
  }
  if (!(s.q >= 0.0) || !(s.initial_dist_sq >= 0.0)) {
    return absl::InvalidArgumentError("q and the initial distance must be >= 0");
  }
  constexpr double e = std::numbers::e;
  const double E = static_cast<double>(s.local_steps);
  const double M = static_cast<double>(s.participants);
  const double N = static_cast<double>(s.num_devices);
  const double T = static_cast<double>(s.total_iterations);
  const double b = static_cast<double>(c.b);
  const double d = static_cast<double>(c.d);
  const double n = static_cast<double>(s.samples_per_device);
  const double mu_sq = c.mu * c.mu;
  const double G_sq = c.G * c.G;
  const double sigma_sq = c.sigma_grad * c.sigma_grad;
  const double lambda_sq = c.lambda_het * c.lambda_het;

  BoundTerms out;
  out.terms[0] = 16.0 * E * E / (T * T) * s.initial_dist_sq;
  out.terms[1] = 16.0 / mu_sq * (2.0 * s.q * G_sq / M + s.q * G_sq / N) * E / T;
  out.terms[2] = 16.0 / mu_sq *
                 (4.0 * e * sigma_sq / (b * M) + 3.0 * c.L * lambda_sq / c.mu +
                  sigma_sq / (b * N)) /
                 T;
  out.terms[3] = 128.0 * e * lambda_sq / (mu_sq * M) * (E - 1.0) / T;
  out.terms[4] = 128.0 * G_sq / mu_sq * (E - 1.0) * (E - 1.0) / T;
  if (s.epsilon.has_value()) {
    if (!(*s.epsilon > 0.0) || !(s.delta > 0.0)) {
      return absl::InvalidArgumentError("epsilon and delta must be positive");
    }
    const double log_arg = 1.25 * E * b / (n * s.delta);
    if (!(log_arg > 1.0)) {
      return absl::OutOfRangeError(absl::StrFormat(
          "Privacy term logarithm argument %g is not above 1", log_arg));
    }
    const double eps_sq = *s.epsilon * *s.epsilon;
    out.terms[5] = 4096.0 * d * G_sq * b * b * (1.0 + s.q) * std::log(log_arg) /
                   (M * n * n * eps_sq) * E * E * E / T;
  }
  out.total = 0.0;
  for (double t : out.terms) out.total += t;
  return out;
}

BudgetStatus BudgetCheck(int64_t rounds, int64_t participants, double beta,
                         double budget_bits) {
  const double required =
      static_cast<double>(rounds) * static_cast<double>(participants) * beta;
  return {required <= budget_bits, budget_bits - required};
}

absl::StatusOr<TradeoffReport> DominantTradeoff(
    const ProblemConstants& constants, const BoundSetting& setting,
    const CommBudget& budget, int64_t max_local_steps) {
  if (max_local_steps < 1 || setting.total_iterations < 1) {
    return absl::InvalidArgumentError("Need E_max >= 1 and T >= 1");
  }
  if (!(budget.beta_bits > 0.0) || !(budget.total_bits() >= 0.0)) {
    return absl::InvalidArgumentError("Need beta > 0 and B >= 0");
  }
  TradeoffReport report;
  report.alpha = budget.alpha(setting.total_iterations);
  for (int64_t e = 1; e <= max_local_steps; ++e) {
    TradeoffRow row;
    row.local_steps = e;
    // Small tolerance so alpha * E = 3.0000000001 style products floor right.
    const double affordable = std::floor(report.alpha * e * (1.0 + 1e-12));
    row.participants = static_cast<int64_t>(
        std::min(affordable, static_cast<double>(setting.num_devices)));
    row.rounds = setting.total_iterations / e;
    if (row.participants >= 1) {
      BoundSetting cell = setting;
      cell.local_steps = e;
      cell.participants = row.participants;
      auto bound = ConvergenceBound(constants, cell);
      if (!bound.ok()) return bound.status();
      row.bound = *bound;
      row.feasible = BudgetCheck(row.rounds, row.participants,
                                 budget.beta_bits, budget.total_bits())
                         .feasible &&
                     row.rounds >= 1;
    }
    if (row.feasible &&
        (!report.minimizer.has_value() ||
         row.bound.total < report.rows[*report.minimizer].bound.total)) {
      report.minimizer = report.rows.size();
    }
    report.rows.push_back(row);
  }
  return report;
}

absl::StatusOr<double> HeterogeneityLambda(
    const ModelShape& shape, const Dataset& data,
    std::span<const DevicePartition> partitions,
    std::span<const double> params, double mu) {
  return GradientDissimilarity(shape, data, partitions, params, mu);
}

}  // namespace fedsim
