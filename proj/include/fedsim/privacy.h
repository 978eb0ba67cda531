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

#ifndef FEDSIM_PRIVACY_H_
#define FEDSIM_PRIVACY_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/random.h"

namespace fedsim {

// Gaussian-mechanism parameters for one device-round. sigma_sq is the noise
// variance that makes the subsampled local update (epsilon, delta)-DP.
struct PrivacySpec {
  double epsilon = 1.0;
  double delta = 1e-4;
  double clip = 1.0;
  // Subsampling ratio E * b / n_k.
  double gamma = 1.0;
  double sensitivity = 1.0;
  double sigma_sq = 0.0;

  // Validates the inputs and fills sigma_sq from the calibration formula.
  static absl::StatusOr<PrivacySpec> Create(double epsilon, double delta,
                                            double clip, double gamma,
                                            double sensitivity);
};

// Projects g onto the L2 ball of radius `bound`. Vectors already inside the
// ball are returned unchanged, bit for bit.
std::vector<double> Clip(std::span<const double> g, double bound);

// How the L2 sensitivity of an E-step local update is obtained.
struct SensitivityMode {
  enum class Kind { kDerived, kFixed };
  Kind kind = Kind::kDerived;
  double fixed_value = 0.0;

  static SensitivityMode Derived() { return {}; }
  static SensitivityMode Fixed(double v) { return {Kind::kFixed, v}; }
};

// Derived: 2 * eta * E * C / b. Replacing one sample moves each of the E
// averaged mini-batch steps by at most 2 eta C / b.
double Sensitivity(double step_size, int64_t local_steps, double clip,
                   int64_t batch_size, SensitivityMode mode);

// sigma^2 = 2 sensitivity^2 ln(1.25 / (delta / gamma)) / (epsilon / 2 gamma)^2.
absl::StatusOr<double> CalibrateSigmaSq(double sensitivity, double epsilon,
                                        double delta, double gamma);

// Privacy loss after drawing E mini-batches of size b without replacement
// from n_k samples: ln(1 + (1 - (1 - b / n_k)^E) (e^epsilon - 1)).
absl::StatusOr<double> AmplifiedEpsilon(double epsilon, int64_t batch_size,
                                        int64_t n_k, int64_t local_steps);

// x + z with z ~ N(0, sigma_sq I). sigma_sq == 0 leaves x untouched and
// draws nothing from the stream.
std::vector<double> GaussianPerturb(std::span<const double> x, double sigma_sq,
                                    RngStream& rng);

}  // namespace fedsim

#endif  // FEDSIM_PRIVACY_H_
