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

#include "fedsim/model.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "absl/strings/str_format.h"

namespace fedsim {
namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double SquaredNorm(std::span<const double> a) { return Dot(a, a); }

absl::Status CheckShape(const ModelShape& shape, std::span<const double> params,
                        const Dataset& data) {
  if (shape.num_classes < 1 || shape.num_features < 1) {
    return absl::InvalidArgumentError("Model shape is empty");
  }
  if (params.size() != shape.dim()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Parameter vector has length %d, model dimension is %d", params.size(),
        shape.dim()));
  }
  if (data.num_features != shape.num_features ||
      data.num_classes != shape.num_classes) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Data layout (%d features, %d classes) does not match model (%d, %d)",
        data.num_features, data.num_classes, shape.num_features,
        shape.num_classes));
  }
  return absl::OkStatus();
}

absl::Status CheckBatch(const Dataset& data, std::span<const size_t> batch) {
  if (batch.empty()) return absl::InvalidArgumentError("Batch is empty");
  for (size_t i : batch) {
    if (i >= data.size()) {
      return absl::OutOfRangeError(absl::StrFormat(
          "Sample index %d outside dataset of size %d", i, data.size()));
    }
  }
  return absl::OkStatus();
}

std::vector<size_t> AllIndices(size_t n) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Fills `logits` and returns log-sum-exp.
double Logits(const ModelShape& shape, std::span<const double> params,
              std::span<const double> x, std::span<double> logits) {
  const size_t u = shape.num_features;
  const size_t bias_offset = static_cast<size_t>(shape.num_classes) * u;
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < shape.num_classes; ++c) {
    double z = Dot(params.subspan(c * u, u), x);
    if (shape.bias) z += params[bias_offset + c];
    logits[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (int c = 0; c < shape.num_classes; ++c) {
    sum += std::exp(logits[c] - max_logit);
  }
  return max_logit + std::log(sum);
}

// out += scale * d(cross-entropy)/d(params) at one sample.
void AddDataGradient(const ModelShape& shape, std::span<const double> params,
                     std::span<const double> x, int label, double scale,
                     std::vector<double>& logits, std::span<double> out) {
  const size_t u = shape.num_features;
  const size_t bias_offset = static_cast<size_t>(shape.num_classes) * u;
  const double lse = Logits(shape, params, x, logits);
  for (int c = 0; c < shape.num_classes; ++c) {
    const double residual =
        scale * (std::exp(logits[c] - lse) - (c == label ? 1.0 : 0.0));
    double* w = out.data() + c * u;
    for (size_t j = 0; j < u; ++j) w[j] += residual * x[j];
    if (shape.bias) out[bias_offset + c] += residual;
  }
}

double SampleNorm(const ModelShape& shape, std::span<const double> x) {
  return SquaredNorm(x) + (shape.bias ? 1.0 : 0.0);
}

}  // namespace

absl::Status ProblemConstants::Validate() const {
  if (!(mu > 0.0) || !(L >= mu)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Need L >= mu > 0 (L=%g mu=%g)", L, mu));
  }
  if (!(sigma_grad >= 0.0) || !(lambda_het >= 0.0) || !(G > 0.0)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Need sigma >= 0, lambda >= 0, G > 0 (sigma=%g lambda=%g G=%g)",
        sigma_grad, lambda_het, G));
  }
  if (b < 1 || d < 1) {
    return absl::InvalidArgumentError("Need b >= 1 and d >= 1");
  }
  return absl::OkStatus();
}

absl::StatusOr<double> Loss(const ModelShape& shape,
                            std::span<const double> params,
                            const Dataset& data, std::span<const size_t> batch,
                            double mu) {
  if (auto s = CheckShape(shape, params, data); !s.ok()) return s;
  if (auto s = CheckBatch(data, batch); !s.ok()) return s;
  std::vector<double> logits(shape.num_classes);
  double total = 0.0;
  for (size_t i : batch) {
    const double lse = Logits(shape, params, data.row(i), logits);
    total += lse - logits[data.labels[i]];
  }
  return total / static_cast<double>(batch.size()) +
         0.5 * mu * SquaredNorm(params);
}

absl::StatusOr<double> Loss(const ModelShape& shape,
                            std::span<const double> params,
                            const Dataset& data, double mu) {
  return Loss(shape, params, data, AllIndices(data.size()), mu);
}

absl::StatusOr<std::vector<double>> Gradient(const ModelShape& shape,
                                             std::span<const double> params,
                                             const Dataset& data,
                                             std::span<const size_t> batch,
                                             double mu) {
  if (auto s = CheckShape(shape, params, data); !s.ok()) return s;
  if (auto s = CheckBatch(data, batch); !s.ok()) return s;
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> logits(shape.num_classes);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (size_t i : batch) {
    AddDataGradient(shape, params, data.row(i), data.labels[i], scale, logits,
                    grad);
  }
  for (size_t k = 0; k < grad.size(); ++k) grad[k] += mu * params[k];
  return grad;
}

absl::StatusOr<std::vector<double>> Gradient(const ModelShape& shape,
                                             std::span<const double> params,
                                             const Dataset& data, double mu) {
  return Gradient(shape, params, data, AllIndices(data.size()), mu);
}

void SampleGradient(const ModelShape& shape, std::span<const double> params,
                    std::span<const double> features, int label, double mu,
                    std::span<double> out) {
  std::vector<double> logits(shape.num_classes);
  for (size_t k = 0; k < out.size(); ++k) out[k] = mu * params[k];
  AddDataGradient(shape, params, features, label, 1.0, logits, out);
}

absl::StatusOr<std::vector<double>> MiniBatchGradient(
    const ModelShape& shape, std::span<const double> params,
    const Dataset& data, std::span<const size_t> batch, double mu,
    std::optional<double> clip) {
  if (auto s = CheckShape(shape, params, data); !s.ok()) return s;
  if (auto s = CheckBatch(data, batch); !s.ok()) return s;
  const size_t d = params.size();
  std::vector<double> sum(d, 0.0);
  std::vector<double> sample(d);
  for (size_t i : batch) {
    SampleGradient(shape, params, data.row(i), data.labels[i], mu, sample);
    if (clip.has_value()) {
      const double norm = std::sqrt(SquaredNorm(sample));
      if (norm > *clip) {
        const double factor = *clip / norm;
        for (double& v : sample) v *= factor;
      }
    }
    for (size_t k = 0; k < d; ++k) sum[k] += sample[k];
  }
  const double count = static_cast<double>(batch.size());
  for (double& v : sum) v /= count;
  return sum;
}

double Accuracy(const ModelShape& shape, std::span<const double> params,
                const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::vector<double> logits(shape.num_classes);
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    Logits(shape, params, data.row(i), logits);
    const int predicted = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (predicted == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

absl::StatusOr<ModelState> SolveReferenceOptimum(const ModelShape& shape,
                                                 const Dataset& data,
                                                 double mu,
                                                 OptimumOptions options) {
  if (!(mu > 0.0)) {
    return absl::InvalidArgumentError(
        "Reference optimum needs a positive regularization weight");
  }
  if (!(options.tol > 0.0)) {
    return absl::InvalidArgumentError("Tolerance must be positive");
  }
  double max_row = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    max_row = std::max(max_row, SampleNorm(shape, data.row(i)));
  }
  const double safe_step = 1.0 / (0.5 * max_row + mu);
  constexpr double kArmijo = 1e-4;

  ModelState state = ModelState::Zeros(shape);
  auto loss = Loss(shape, state.params, data, mu);
  if (!loss.ok()) return loss.status();
  auto grad = Gradient(shape, state.params, data, mu);
  if (!grad.ok()) return grad.status();
  double f = *loss;
  std::vector<double> g = *std::move(grad);
  double trial = safe_step;
  std::vector<double> candidate(g.size());
  // Nonmonotone Armijo reference: max loss over the last kMemory iterates.
  constexpr size_t kMemory = 10;
  std::deque<double> recent = {f};

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double g_sq = SquaredNorm(g);
    if (std::sqrt(g_sq) <= options.tol) {
      state.iteration = iter;
      return state;
    }
    const double f_ref = *std::max_element(recent.begin(), recent.end());
    double step = trial;
    double f_new = 0.0;
    for (;;) {
      // Once the predicted decrease is below the rounding level of f the
      // Armijo test carries no information. Near the optimum the objective
      // is locally quadratic, so the Barzilai-Borwein step is taken as is.
      const bool unresolved =
          step * g_sq <= 1e-13 * std::max(1.0, std::abs(f));
      if (step < safe_step) step = safe_step;
      for (size_t k = 0; k < g.size(); ++k) {
        candidate[k] = state.params[k] - step * g[k];
      }
      f_new = *Loss(shape, candidate, data, mu);
      if (unresolved || step <= safe_step ||
          f_new <= f_ref - kArmijo * step * g_sq) {
        break;
      }
      step *= 0.5;
    }
    std::vector<double> g_new = *Gradient(shape, candidate, data, mu);
    double s_dot_s = 0.0, s_dot_y = 0.0;
    for (size_t k = 0; k < g.size(); ++k) {
      const double s = candidate[k] - state.params[k];
      const double y = g_new[k] - g[k];
      s_dot_s += s * s;
      s_dot_y += s * y;
    }
    trial = s_dot_y > 0.0 ? s_dot_s / s_dot_y : safe_step;
    state.params.swap(candidate);
    g.swap(g_new);
    f = f_new;
    recent.push_back(f);
    if (recent.size() > kMemory) recent.pop_front();
  }
  return absl::DeadlineExceededError(absl::StrFormat(
      "Reference optimum did not converge in %d iterations; final gradient "
      "norm %g (tol %g)",
      options.max_iterations, std::sqrt(SquaredNorm(g)), options.tol));
}

absl::StatusOr<double> GradientDissimilarity(
    const ModelShape& shape, const Dataset& data,
    std::span<const DevicePartition> partitions,
    std::span<const double> params, double mu) {
  if (partitions.empty()) {
    return absl::InvalidArgumentError("Need at least one partition");
  }
  const size_t d = params.size();
  std::vector<std::vector<double>> device_grads;
  device_grads.reserve(partitions.size());
  std::vector<double> mean(d, 0.0);
  for (const auto& part : partitions) {
    auto g = Gradient(shape, params, data, part.sample_indices, mu);
    if (!g.ok()) return g.status();
    for (size_t k = 0; k < d; ++k) mean[k] += (*g)[k];
    device_grads.push_back(*std::move(g));
  }
  const double n = static_cast<double>(partitions.size());
  for (double& v : mean) v /= n;
  double total = 0.0;
  for (const auto& g : device_grads) {
    for (size_t k = 0; k < d; ++k) {
      const double diff = g[k] - mean[k];
      total += diff * diff;
    }
  }
  return std::sqrt(total / n);
}

absl::StatusOr<ProblemConstants> EstimateConstants(
    const ModelShape& shape, const Dataset& data,
    std::span<const DevicePartition> partitions, double mu,
    std::span<const ModelState> probes, ConstantsOptions options) {
  if (probes.empty()) {
    return absl::InvalidArgumentError("Need at least one probe point");
  }
  if (!(mu > 0.0)) {
    return absl::InvalidArgumentError("mu must be positive");
  }
  if (options.batch_size < 1) {
    return absl::InvalidArgumentError("Batch size must be at least 1");
  }
  std::vector<DevicePartition> single;
  if (partitions.empty()) {
    single.push_back({0, AllIndices(data.size())});
    partitions = single;
  }

  ProblemConstants out;
  out.mu = mu;
  out.b = options.batch_size;
  out.d = static_cast<int64_t>(shape.dim());
  double max_row = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    max_row = std::max(max_row, SampleNorm(shape, data.row(i)));
  }
  out.L = 0.5 * max_row + mu;

  const size_t d = shape.dim();
  double max_grad_norm = 0.0;
  double max_sigma_sq = 0.0;
  double max_lambda = 0.0;
  std::vector<double> sample(d);
  for (const ModelState& probe : probes) {
    if (auto s = CheckShape(shape, probe.params, data); !s.ok()) return s;
    for (const auto& part : partitions) {
      const size_t n = part.size();
      if (n == 0) continue;
      std::vector<double> mean(d, 0.0);
      double mean_sq_norm = 0.0;
      for (size_t i : part.sample_indices) {
        SampleGradient(shape, probe.params, data.row(i), data.labels[i], mu,
                       sample);
        const double sq = SquaredNorm(sample);
        max_grad_norm = std::max(max_grad_norm, std::sqrt(sq));
        mean_sq_norm += sq;
        for (size_t k = 0; k < d; ++k) mean[k] += sample[k];
      }
      const double count = static_cast<double>(n);
      for (double& v : mean) v /= count;
      mean_sq_norm /= count;
      const size_t b = static_cast<size_t>(options.batch_size);
      if (b < n && n > 1) {
        const double population_var =
            std::max(0.0, mean_sq_norm - SquaredNorm(mean));
        const double sigma_sq = population_var *
                                static_cast<double>(n - b) /
                                static_cast<double>(n - 1);
        max_sigma_sq = std::max(max_sigma_sq, sigma_sq);
      }
    }
    auto lambda =
        GradientDissimilarity(shape, data, partitions, probe.params, mu);
    if (!lambda.ok()) return lambda.status();
    max_lambda = std::max(max_lambda, *lambda);
  }
  out.G = options.clip.has_value() ? *options.clip : max_grad_norm;
  out.sigma_grad = std::sqrt(max_sigma_sq);
  out.lambda_het = max_lambda;
  if (!(out.G > 0.0)) out.G = std::numeric_limits<double>::min();
  return out;
}

}  // namespace fedsim
