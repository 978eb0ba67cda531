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

#include "fedsim/privacy.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace fedsim {

absl::StatusOr<PrivacySpec> PrivacySpec::Create(double epsilon, double delta,
                                                double clip, double gamma,
                                                double sensitivity) {
  if (!(clip > 0.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Clipping bound must be positive, got %g", clip));
  }
  if (!(sensitivity > 0.0)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Sensitivity must be positive, got %g", sensitivity));
  }
  auto sigma_sq = CalibrateSigmaSq(sensitivity, epsilon, delta, gamma);
  if (!sigma_sq.ok()) return sigma_sq.status();
  PrivacySpec spec;
  spec.epsilon = epsilon;
  spec.delta = delta;
  spec.clip = clip;
  spec.gamma = gamma;
  spec.sensitivity = sensitivity;
  spec.sigma_sq = *sigma_sq;
  return spec;
}

std::vector<double> Clip(std::span<const double> g, double bound) {
  std::vector<double> out(g.begin(), g.end());
  double norm_sq = 0.0;
  for (double v : g) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm > bound) {
    const double factor = bound / norm;
    for (double& v : out) v *= factor;
  }
  return out;
}

double Sensitivity(double step_size, int64_t local_steps, double clip,
                   int64_t batch_size, SensitivityMode mode) {
  if (mode.kind == SensitivityMode::Kind::kFixed) return mode.fixed_value;
  return 2.0 * step_size * static_cast<double>(local_steps) * clip /
         static_cast<double>(batch_size);
}

absl::StatusOr<double> CalibrateSigmaSq(double sensitivity, double epsilon,
                                        double delta, double gamma) {
  if (!(epsilon > 0.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Epsilon must be positive, got %g", epsilon));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Delta must lie in (0, 1), got %g", delta));
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Subsampling ratio must lie in (0, 1], got %g", gamma));
  }
  const double delta_eff = delta / gamma;
  if (delta_eff >= 1.25) {
    return absl::OutOfRangeError(absl::StrFormat(
        "delta / gamma = %g >= 1.25 makes the noise logarithm nonpositive",
        delta_eff));
  }
  const double eps_eff = epsilon / (2.0 * gamma);
  return 2.0 * sensitivity * sensitivity * std::log(1.25 / delta_eff) /
         (eps_eff * eps_eff);
}

absl::StatusOr<double> AmplifiedEpsilon(double epsilon, int64_t batch_size,
                                        int64_t n_k, int64_t local_steps) {
  if (!(epsilon > 0.0)) {
    return absl::InvalidArgumentError("Epsilon must be positive");
  }
  if (batch_size < 1 || local_steps < 1 || n_k < 1) {
    return absl::InvalidArgumentError(
        "Batch size, local steps and n_k must be positive");
  }
  if (batch_size > n_k) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Batch size %d exceeds the %d local samples", batch_size, n_k));
  }
  const double keep = 1.0 - static_cast<double>(batch_size) / n_k;
  const double hit = 1.0 - std::pow(keep, static_cast<double>(local_steps));
  return std::log1p(hit * std::expm1(epsilon));
}

std::vector<double> GaussianPerturb(std::span<const double> x, double sigma_sq,
                                    RngStream& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (sigma_sq <= 0.0) return out;
  const double stddev = std::sqrt(sigma_sq);
  for (double& v : out) v += rng.Normal(0.0, stddev);
  return out;
}

}  // namespace fedsim
