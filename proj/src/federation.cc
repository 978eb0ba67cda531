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

#include "fedsim/federation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedsim/compressor.h"

namespace fedsim {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool AllFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

absl::StatusOr<Algorithm> ParseAlgorithm(absl::string_view name) {
  if (name == "dist_sgd") return Algorithm::kDistSgd;
  if (name == "fedavg") return Algorithm::kFedAvg;
  if (name == "fedpaq") return Algorithm::kFedPaq;
  if (name == "dp_fedpaq") return Algorithm::kDpFedPaq;
  if (name == "scaffold") return Algorithm::kScaffold;
  return absl::InvalidArgumentError(absl::StrCat(
      "Unknown algorithm '", name,
      "' (expected dist_sgd, fedavg, fedpaq, dp_fedpaq or scaffold)"));
}

absl::string_view AlgorithmName(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kDistSgd:
      return "dist_sgd";
    case Algorithm::kFedAvg:
      return "fedavg";
    case Algorithm::kFedPaq:
      return "fedpaq";
    case Algorithm::kDpFedPaq:
      return "dp_fedpaq";
    case Algorithm::kScaffold:
      return "scaffold";
  }
  return "unknown";
}

absl::StatusOr<RunConfig> RunConfig::Normalized() const {
  RunConfig out = *this;
  if (out.num_devices < 1) {
    return absl::InvalidArgumentError("N must be at least 1");
  }
  switch (out.algorithm) {
    case Algorithm::kDistSgd:
      out.local_steps = 1;
      out.participants = out.num_devices;
      out.level.reset();
      break;
    case Algorithm::kFedAvg:
    case Algorithm::kScaffold:
      out.level.reset();
      break;
    case Algorithm::kFedPaq:
      break;
    case Algorithm::kDpFedPaq:
      if (!out.privacy.has_value()) {
        return absl::InvalidArgumentError(
            "dp_fedpaq needs privacy settings (epsilon, delta, clip)");
      }
      out.eta_g = 1.0;
      out.batch_sampling = BatchSampling::kSubsample;
      break;
  }
  if (out.algorithm != Algorithm::kDpFedPaq) out.privacy.reset();

  if (out.participants < 1 || out.participants > out.num_devices) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Need 1 <= M <= N (M=%d N=%d)", out.participants, out.num_devices));
  }
  if (out.local_steps < 1) {
    return absl::InvalidArgumentError("E must be at least 1");
  }
  if (out.total_iterations.has_value()) {
    if (*out.total_iterations < 0) {
      return absl::InvalidArgumentError("T must be nonnegative");
    }
    out.rounds = *out.total_iterations / out.local_steps;
  }
  if (out.rounds < 0) {
    return absl::InvalidArgumentError("K must be nonnegative");
  }
  if (!out.total_iterations.has_value()) {
    out.total_iterations = out.rounds * out.local_steps;
  }
  if (out.batch_size < 1) {
    return absl::InvalidArgumentError("Batch size must be at least 1");
  }
  if (out.level.has_value() && *out.level < 1) {
    return absl::InvalidArgumentError("Quantization level must be >= 1");
  }
  if (!(out.eta0 > 0.0) || !(out.eta_g > 0.0)) {
    return absl::InvalidArgumentError("Step sizes must be positive");
  }
  if (!(out.mu >= 0.0)) {
    return absl::InvalidArgumentError("mu must be nonnegative");
  }
  if (out.lr_mode == LrMode::kTheoretical && !(out.mu > 0.0)) {
    return absl::InvalidArgumentError(
        "The theoretical learning rate needs mu > 0");
  }
  if (out.privacy.has_value()) {
    const PrivacyConfig& p = *out.privacy;
    if (!(p.epsilon > 0.0) || !(p.delta > 0.0 && p.delta < 1.0) ||
        !(p.clip > 0.0)) {
      return absl::InvalidArgumentError(
          "Privacy needs epsilon > 0, delta in (0, 1) and clip > 0");
    }
    if (p.gamma.has_value() && !(*p.gamma > 0.0 && *p.gamma <= 1.0)) {
      return absl::InvalidArgumentError("gamma must lie in (0, 1]");
    }
    if (p.sensitivity.kind == SensitivityMode::Kind::kFixed &&
        !(p.sensitivity.fixed_value > 0.0)) {
      return absl::InvalidArgumentError("Fixed sensitivity must be positive");
    }
    if (p.sigma_sq_override.has_value() && !(*p.sigma_sq_override >= 0.0)) {
      return absl::InvalidArgumentError("sigma_sq override must be >= 0");
    }
  }
  return out;
}

std::vector<int> Schedule(int num_devices, int participants, int64_t round,
                          uint64_t seed) {
  std::vector<int> ids(num_devices);
  std::iota(ids.begin(), ids.end(), 0);
  if (participants >= num_devices) return ids;
  RngStream rng = RngStream::For(seed, StreamPurpose::kSchedule, 0,
                                 static_cast<uint64_t>(round));
  for (int k = 0; k < participants; ++k) {
    const size_t j = k + rng.Index(static_cast<size_t>(num_devices - k));
    std::swap(ids[k], ids[j]);
  }
  ids.resize(participants);
  std::sort(ids.begin(), ids.end());
  return ids;
}

absl::StatusOr<double> LearningRate(int64_t round, const RunConfig& config) {
  if (round < 0) return absl::InvalidArgumentError("Round must be >= 0");
  const double k = static_cast<double>(round);
  const double e = static_cast<double>(config.local_steps);
  if (config.lr_mode == LrMode::kExperimental) {
    return config.eta0 / (1.0 + k * e / 100.0);
  }
  if (!(config.mu > 0.0)) {
    return absl::InvalidArgumentError(
        "The theoretical learning rate needs mu > 0");
  }
  return 4.0 / (config.mu * (k * e + 4.0 * e));
}

absl::StatusOr<int64_t> EffectiveBatchSize(
    const RunConfig& config, std::span<const DevicePartition> partitions) {
  if (!config.privacy.has_value() || !config.privacy->gamma.has_value()) {
    return config.batch_size;
  }
  size_t n_min = std::numeric_limits<size_t>::max();
  for (const auto& p : partitions) n_min = std::min(n_min, p.size());
  if (partitions.empty()) n_min = 0;
  const double exact = *config.privacy->gamma *
                       static_cast<double>(n_min) / config.local_steps;
  const int64_t b = static_cast<int64_t>(std::floor(exact + 1e-9));
  if (b < 1) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "gamma=%g with n_k=%d and E=%d leaves no room for a mini-batch",
        *config.privacy->gamma, n_min, config.local_steps));
  }
  return b;
}

absl::StatusOr<LocalUpdate> ComputeLocalUpdate(
    const FederatedData& data, int device, std::span<const double> x,
    const RunConfig& config, int64_t round, double step_size,
    int64_t batch_size, const ControlVariates* variates) {
  if (device < 0 || static_cast<size_t>(device) >= data.partitions.size()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("No partition for device %d", device));
  }
  const DevicePartition& part = data.partitions[device];
  if (part.size() == 0) {
    return absl::FailedPreconditionError(
        absl::StrFormat("Device %d holds no samples", device));
  }
  const bool scaffold = config.algorithm == Algorithm::kScaffold;
  if (scaffold && variates == nullptr) {
    return absl::InvalidArgumentError("scaffold needs control variates");
  }
  const size_t d = x.size();
  const int64_t steps = config.local_steps;
  const auto b = static_cast<size_t>(batch_size);
  const uint64_t dev = static_cast<uint64_t>(device);
  const uint64_t rnd = static_cast<uint64_t>(round);
  RngStream batch_rng =
      RngStream::For(config.seed, StreamPurpose::kBatch, dev, rnd);

  std::vector<size_t> pool;
  if (config.batch_sampling == BatchSampling::kSubsample) {
    auto sample = Subsample(part, b * steps, batch_rng);
    if (!sample.ok()) return sample.status();
    pool = *std::move(sample);
  }
  std::optional<double> clip;
  if (config.privacy.has_value()) clip = config.privacy->clip;

  // Track y_t - x_k directly so that one step yields exactly -eta * g.
  LocalUpdate out;
  out.delta.assign(d, 0.0);
  std::vector<double> y(d);
  std::vector<size_t> batch(b);
  for (int64_t t = 0; t < steps; ++t) {
    if (config.batch_sampling == BatchSampling::kSubsample) {
      std::copy_n(pool.begin() + t * b, b, batch.begin());
    } else {
      for (size_t j = 0; j < b; ++j) {
        batch[j] = part.sample_indices[batch_rng.Index(part.size())];
      }
    }
    for (size_t k = 0; k < d; ++k) y[k] = x[k] + out.delta[k];
    auto g = MiniBatchGradient(data.shape, y, *data.train, batch, config.mu,
                               clip);
    if (!g.ok()) return g.status();
    if (scaffold) {
      const auto& c_local = variates->local[device];
      for (size_t k = 0; k < d; ++k) {
        (*g)[k] = (*g)[k] - c_local[k] + variates->global[k];
      }
    }
    for (size_t k = 0; k < d; ++k) out.delta[k] -= step_size * (*g)[k];
  }

  if (config.privacy.has_value()) {
    const PrivacyConfig& p = *config.privacy;
    const int64_t n_k = static_cast<int64_t>(part.size());
    const double gamma =
        static_cast<double>(batch_size * steps) / static_cast<double>(n_k);
    if (p.sigma_sq_override.has_value()) {
      out.sigma_sq = *p.sigma_sq_override;
    } else {
      const double sensitivity =
          Sensitivity(step_size, steps, p.clip, batch_size, p.sensitivity);
      auto sigma_sq = CalibrateSigmaSq(sensitivity, p.epsilon, p.delta, gamma);
      if (!sigma_sq.ok()) return sigma_sq.status();
      out.sigma_sq = *sigma_sq;
    }
    auto eps = AmplifiedEpsilon(p.epsilon, batch_size, n_k, steps);
    if (!eps.ok()) return eps.status();
    out.eps_prime = *eps;
    RngStream noise_rng =
        RngStream::For(config.seed, StreamPurpose::kNoise, dev, rnd);
    out.delta = GaussianPerturb(out.delta, out.sigma_sq, noise_rng);
  }

  if (scaffold) {
    // c_i' = c_i - c - delta / (E eta), so c_i' - c_i = -c - delta / (E eta).
    const double inv = 1.0 / (static_cast<double>(steps) * step_size);
    out.control_delta.resize(d);
    for (size_t k = 0; k < d; ++k) {
      out.control_delta[k] = -variates->global[k] - out.delta[k] * inv;
    }
  }

  if (!AllFinite(out.delta)) {
    return absl::AbortedError(absl::StrFormat(
        "Non-finite local update from device %d in round %d", device, round));
  }
  return out;
}

absl::StatusOr<std::vector<double>> Aggregate(
    std::span<const double> x, std::span<const std::vector<double>> updates,
    double eta_g) {
  if (updates.empty()) {
    return absl::InvalidArgumentError("No updates to aggregate");
  }
  std::vector<double> sum(x.size(), 0.0);
  for (const auto& u : updates) {
    if (u.size() != x.size()) {
      return absl::InternalError(absl::StrFormat(
          "Update of length %d does not match model of length %d", u.size(),
          x.size()));
    }
    for (size_t k = 0; k < x.size(); ++k) sum[k] += u[k];
  }
  const double scale = eta_g / static_cast<double>(updates.size());
  std::vector<double> out(x.begin(), x.end());
  for (size_t k = 0; k < x.size(); ++k) out[k] += scale * sum[k];
  return out;
}

absl::StatusOr<RunResult> Run(const RunConfig& raw_config,
                              const FederatedData& data,
                              std::span<const double> reference,
                              const RoundObserver& observer) {
  auto normalized = raw_config.Normalized();
  if (!normalized.ok()) return normalized.status();
  const RunConfig& config = *normalized;
  if (data.train == nullptr) {
    return absl::InvalidArgumentError("No training data");
  }
  if (data.partitions.size() != static_cast<size_t>(config.num_devices)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Config has N=%d devices but %d partitions were built",
        config.num_devices, data.partitions.size()));
  }
  const size_t d = data.shape.dim();
  if (!reference.empty() && reference.size() != d) {
    return absl::InvalidArgumentError("Reference optimum has wrong dimension");
  }
  auto batch_size = EffectiveBatchSize(config, data.partitions);
  if (!batch_size.ok()) return batch_size.status();

  const bool scaffold = config.algorithm == Algorithm::kScaffold;
  const bool quantized = config.level.has_value();
  ControlVariates variates;
  if (scaffold) variates = ControlVariates::Zeros(config.num_devices, d);

  RunResult result;
  result.final_state = ModelState::Zeros(data.shape);
  std::vector<double>& x = result.final_state.params;
  int64_t bits_cumulative = 0;

  for (int64_t k = 0; k < config.rounds; ++k) {
    auto step = LearningRate(k, config);
    if (!step.ok()) return step.status();
    const std::vector<int> participants =
        Schedule(config.num_devices, config.participants, k, config.seed);

    std::vector<std::vector<double>> updates;
    updates.reserve(participants.size());
    int64_t bits_round = 0;
    double sigma_sum = 0.0;
    double eps_sum = 0.0;
    std::vector<std::pair<int, std::vector<double>>> control_deltas;
    for (int device : participants) {
      auto local = ComputeLocalUpdate(data, device, x, config, k, *step,
                                      *batch_size,
                                      scaffold ? &variates : nullptr);
      if (!local.ok()) return local.status();
      sigma_sum += local->sigma_sq;
      eps_sum += local->eps_prime;
      if (quantized) {
        RngStream qrng =
            RngStream::For(config.seed, StreamPurpose::kQuantize,
                           static_cast<uint64_t>(device),
                           static_cast<uint64_t>(k));
        const QuantizedVector qv = Quantize(local->delta, *config.level, qrng);
        const EncodedPayload payload = Encode(qv);
        bits_round += payload.bits;
        auto received = Decode(payload.bytes, d, *config.level);
        if (!received.ok()) return received.status();
        updates.push_back(Dequantize(*received));
      } else {
        bits_round += (scaffold ? 2 : 1) * RawBitCost(static_cast<int64_t>(d));
        updates.push_back(std::move(local->delta));
      }
      if (scaffold) {
        control_deltas.emplace_back(device, std::move(local->control_delta));
      }
    }

    auto next = Aggregate(x, updates, config.eta_g);
    if (!next.ok()) return next.status();
    x = *std::move(next);
    if (!AllFinite(x)) {
      return absl::AbortedError(
          absl::StrFormat("Global model became non-finite in round %d", k));
    }
    if (observer) observer(k + 1, x);
    if (scaffold) {
      const double inv_n = 1.0 / static_cast<double>(config.num_devices);
      std::vector<double> sum(d, 0.0);
      for (const auto& [device, dc] : control_deltas) {
        for (size_t j = 0; j < d; ++j) {
          variates.local[device][j] += dc[j];
          sum[j] += dc[j];
        }
      }
      for (size_t j = 0; j < d; ++j) variates.global[j] += inv_n * sum[j];
    }

    bits_cumulative += bits_round;
    RoundRecord rec;
    rec.round = k + 1;
    rec.iteration = (k + 1) * config.local_steps;
    auto loss = Loss(data.shape, x, *data.train, config.mu);
    if (!loss.ok()) return loss.status();
    rec.train_loss = *loss;
    rec.test_accuracy =
        data.test != nullptr ? Accuracy(data.shape, x, *data.test) : kNaN;
    if (reference.empty()) {
      rec.dist_sq_to_opt = kNaN;
    } else {
      double dist = 0.0;
      for (size_t j = 0; j < d; ++j) {
        const double diff = x[j] - reference[j];
        dist += diff * diff;
      }
      rec.dist_sq_to_opt = dist;
    }
    rec.bits_round = bits_round;
    rec.bits_cumulative = bits_cumulative;
    const double m = static_cast<double>(participants.size());
    rec.eps_prime = config.privacy.has_value() ? eps_sum / m : kNaN;
    rec.sigma_sq = sigma_sum / m;
    result.records.push_back(rec);
  }
  result.final_state.round = config.rounds;
  result.final_state.iteration = config.rounds * config.local_steps;
  return result;
}

}  // namespace fedsim
