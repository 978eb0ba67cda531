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

#ifndef FEDSIM_MODEL_H_
#define FEDSIM_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedsim/dataset.h"

namespace fedsim {

// Multinomial logistic regression. The flat parameter vector holds the
// classes x features weight matrix row by row, followed by one bias per class
// when `bias` is set.
struct ModelShape {
  size_t num_features = 0;
  int num_classes = 0;
  bool bias = true;

  size_t dim() const {
    return static_cast<size_t>(num_classes) * (num_features + (bias ? 1 : 0));
  }
  static ModelShape For(const Dataset& data, bool bias = true) {
    return {data.num_features, data.num_classes, bias};
  }
};

struct ModelState {
  std::vector<double> params;
  int64_t round = 0;
  int64_t iteration = 0;

  static ModelState Zeros(const ModelShape& shape) {
    return {std::vector<double>(shape.dim(), 0.0), 0, 0};
  }
};

// Constants of the smoothness / convexity / variance / heterogeneity /
// gradient-bound assumptions used by the convergence bound.
struct ProblemConstants {
  double L = 1.0;
  double mu = 1.0;
  double sigma_grad = 0.0;
  double lambda_het = 0.0;
  double G = 1.0;
  int64_t b = 1;
  int64_t d = 1;

  absl::Status Validate() const;
};

// Mean softmax cross-entropy over `batch` plus (mu / 2) ||params||^2.
absl::StatusOr<double> Loss(const ModelShape& shape,
                            std::span<const double> params,
                            const Dataset& data, std::span<const size_t> batch,
                            double mu);
absl::StatusOr<double> Loss(const ModelShape& shape,
                            std::span<const double> params,
                            const Dataset& data, double mu);

// Gradient of Loss with respect to params.
absl::StatusOr<std::vector<double>> Gradient(const ModelShape& shape,
                                             std::span<const double> params,
                                             const Dataset& data,
                                             std::span<const size_t> batch,
                                             double mu);
absl::StatusOr<std::vector<double>> Gradient(const ModelShape& shape,
                                             std::span<const double> params,
                                             const Dataset& data, double mu);

// Gradient of the regularized loss at a single sample, written to `out`.
void SampleGradient(const ModelShape& shape, std::span<const double> params,
                    std::span<const double> features, int label, double mu,
                    std::span<double> out);

// Mean of per-sample gradients over `batch`, summed in batch order. With
// `clip`, every per-sample gradient is first projected onto the ball of that
// radius.
absl::StatusOr<std::vector<double>> MiniBatchGradient(
    const ModelShape& shape, std::span<const double> params,
    const Dataset& data, std::span<const size_t> batch, double mu,
    std::optional<double> clip = std::nullopt);

// Fraction of samples whose arg-max class matches the label.
double Accuracy(const ModelShape& shape, std::span<const double> params,
                const Dataset& data);

struct OptimumOptions {
  double tol = 1e-10;
  int max_iterations = 200000;
};

// Minimizer of the full-batch regularized loss by gradient descent with
// Barzilai-Borwein trial steps and nonmonotone Armijo backtracking, starting
// from zero.
// Requires mu > 0. Deterministic.
absl::StatusOr<ModelState> SolveReferenceOptimum(
    const ModelShape& shape, const Dataset& data, double mu,
    OptimumOptions options = {});

// sqrt((1/N) sum_i ||grad f_i(x) - grad f(x)||^2) with grad f the uniform
// average of the device gradients. N = partitions.size().
absl::StatusOr<double> GradientDissimilarity(
    const ModelShape& shape, const Dataset& data,
    std::span<const DevicePartition> partitions,
    std::span<const double> params, double mu);

struct ConstantsOptions {
  int64_t batch_size = 1;
  // Active per-sample clipping bound; G is then reported as this value.
  std::optional<double> clip;
};

// Empirical constants at the given probe points. L is the analytic bound
// max_j ||[x_j, 1]||^2 / 2 + mu and mu is passed through. G, sigma_grad and
// lambda_het are maxima over the probes, i.e. lower estimates of the true
// suprema. sigma_grad^2 is b times the variance of a size-b mini-batch mean
// drawn without replacement from a device, so it vanishes at b = n_k.
// An empty partition list treats the dataset as one device.
absl::StatusOr<ProblemConstants> EstimateConstants(
    const ModelShape& shape, const Dataset& data,
    std::span<const DevicePartition> partitions, double mu,
    std::span<const ModelState> probes, ConstantsOptions options = {});

}  // namespace fedsim

#endif  // FEDSIM_MODEL_H_
