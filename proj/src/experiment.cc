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

#include "fedsim/experiment.h"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_replace.h"
#include "fedsim/compressor.h"

namespace fedsim {
namespace {

std::string Real(double v) { return absl::StrFormat("%.12g", v); }

absl::Status WriteFile(const std::filesystem::path& path,
                       const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot write ", path.string()));
  }
  out << contents;
  out.close();
  if (!out) {
    return absl::DataLossError(absl::StrCat("failed writing ", path.string()));
  }
  return absl::OkStatus();
}

struct Cell {
  std::optional<std::string> value;
  uint64_t seed = 0;
  ExperimentConfig config;
  std::string file;
};

absl::StatusOr<std::vector<double>> ReferenceOptimum(
    const PreparedData& data, double mu, double tol) {
  if (!(mu > 0.0)) return std::vector<double>{};
  auto opt = SolveReferenceOptimum(data.shape, data.train, mu, {tol});
  if (!opt.ok()) return opt.status();
  return opt->params;
}

}  // namespace

absl::StatusOr<PreparedData> PrepareData(const DatasetManifest& manifest) {
  PreparedData out;
  if (manifest.source == DatasetManifest::Source::kSynthetic) {
    if (manifest.n < 1 || manifest.u < 1 || manifest.test_n < 0) {
      return absl::InvalidArgumentError(
          "synthetic data needs n >= 1, u >= 1, test_n >= 0");
    }
    auto all = SynthClassification(
        static_cast<size_t>(manifest.n + manifest.test_n),
        static_cast<size_t>(manifest.u), manifest.classes, manifest.separation,
        manifest.seed);
    if (!all.ok()) return all.status();
    std::vector<size_t> train_idx(manifest.n), test_idx(manifest.test_n);
    for (size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
    for (size_t i = 0; i < test_idx.size(); ++i) {
      test_idx[i] = manifest.n + i;
    }
    out.train = Subset(*all, train_idx);
    if (manifest.test_n > 0) out.test = Subset(*all, test_idx);
  } else {
    if (manifest.train_images.empty() || manifest.train_labels.empty()) {
      return absl::InvalidArgumentError(
          "idx source needs dataset.train_images and dataset.train_labels");
    }
    auto train = LoadIdxDataset(manifest.train_images, manifest.train_labels);
    if (!train.ok()) return train.status();
    out.train = *std::move(train);
    if (!manifest.test_images.empty() && !manifest.test_labels.empty()) {
      auto test = LoadIdxDataset(manifest.test_images, manifest.test_labels);
      if (!test.ok()) return test.status();
      out.test = *std::move(test);
    }
  }
  out.shape = ModelShape::For(out.train, manifest.bias);
  return out;
}

absl::StatusOr<std::vector<DevicePartition>> PartitionFor(
    const PreparedData& data, const DatasetManifest& manifest,
    int num_devices) {
  return PartitionLabelSkew(data.train, num_devices,
                            manifest.labels_per_device,
                            manifest.partition_seed.value_or(manifest.seed));
}

std::string FormatRecord(const RoundRecord& r) {
  return absl::StrCat(r.round, ",", r.iteration, ",", Real(r.train_loss), ",",
                      Real(r.test_accuracy), ",", Real(r.dist_sq_to_opt), ",",
                      r.bits_round, ",", r.bits_cumulative, ",",
                      Real(r.eps_prime), ",", Real(r.sigma_sq));
}

std::string FormatRunCsv(const std::vector<RoundRecord>& records) {
  std::string out = absl::StrCat(kRunCsvHeader, "\n");
  for (const auto& r : records) absl::StrAppend(&out, FormatRecord(r), "\n");
  return out;
}

std::string FormatBoundCsv(const TradeoffReport& report) {
  std::string out = absl::StrCat(kBoundCsvHeader, "\n");
  for (const auto& row : report.rows) {
    absl::StrAppend(&out, row.local_steps, ",", row.participants, ",",
                    row.rounds, ",", Real(row.bound.total));
    for (double t : row.bound.terms) absl::StrAppend(&out, ",", Real(t));
    absl::StrAppend(&out, ",", row.feasible ? 1 : 0, "\n");
  }
  return out;
}

absl::Status RunExperiment(const ExperimentConfig& config,
                           const ExperimentOptions& options,
                           std::ostream& log) {
  const std::filesystem::path out_dir =
      options.out_dir.value_or(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot create ", out_dir.string(), ": ", ec.message()));
  }
  auto data = PrepareData(config.dataset);
  if (!data.ok()) return data.status();

  const uint64_t base_seed = options.seed.value_or(config.run.seed);
  std::vector<std::optional<std::string>> values;
  if (config.sweep_key.has_value()) {
    values.assign(config.sweep_values.begin(), config.sweep_values.end());
  } else {
    values.push_back(std::nullopt);
  }

  std::vector<Cell> cells;
  for (const auto& value : values) {
    for (int r = 0; r < config.repeats; ++r) {
      Cell cell;
      cell.value = value;
      cell.seed = base_seed + static_cast<uint64_t>(r);
      cell.config = config;
      if (value.has_value()) {
        if (auto s = ApplyRunSetting(cell.config, *config.sweep_key, *value);
            !s.ok()) {
          return s;
        }
      }
      cell.config.run.seed = cell.seed;
      std::string stem = "run";
      if (value.has_value()) {
        stem = absl::StrCat(
            "run_", absl::StrReplaceAll(*config.sweep_key, {{".", "-"}}), "_",
            absl::StrReplaceAll(*value, {{"/", "_"}, {" ", "_"}}));
      }
      cell.file = absl::StrCat(stem, "_seed", cell.seed, ".csv");
      cells.push_back(std::move(cell));
    }
  }

  // Reference optima and partitions are shared across cells with equal mu / N.
  std::map<double, std::vector<double>> optima;
  std::map<int, std::vector<DevicePartition>> partitions;
  for (const Cell& cell : cells) {
    auto run = cell.config.run.Normalized();
    if (!run.ok()) return run.status();
    if (!optima.contains(run->mu)) {
      auto opt = ReferenceOptimum(*data, run->mu, config.reference_tol);
      if (!opt.ok()) return opt.status();
      optima.emplace(run->mu, *std::move(opt));
    }
    if (!partitions.contains(run->num_devices)) {
      auto parts = PartitionFor(*data, config.dataset, run->num_devices);
      if (!parts.ok()) return parts.status();
      partitions.emplace(run->num_devices, *std::move(parts));
    }
  }

  std::vector<absl::Status> statuses(cells.size());
  std::atomic<size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      FederatedData view;
      view.shape = data->shape;
      view.train = &data->train;
      view.test = data->test.has_value() ? &*data->test : nullptr;
      view.partitions = partitions.at(cell.config.run.Normalized()->num_devices);
      const auto& reference = optima.at(cell.config.run.Normalized()->mu);
      auto result = Run(cell.config.run, view, reference);
      if (!result.ok()) {
        statuses[i] = result.status();
        continue;
      }
      statuses[i] =
          WriteFile(out_dir / cell.file, FormatRunCsv(result->records));
      std::lock_guard<std::mutex> lock(log_mutex);
      log << "wrote " << (out_dir / cell.file).string() << "\n";
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, cells.size()));
  std::vector<std::thread> threads;
  for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (size_t i = 0; i < cells.size(); ++i) {
    if (!statuses[i].ok()) {
      return absl::Status(statuses[i].code(),
                          absl::StrCat(cells[i].file, ": ",
                                       statuses[i].message()));
    }
  }

  std::string manifest = "file,sweep_param,sweep_value,seed\n";
  for (const Cell& cell : cells) {
    absl::StrAppend(&manifest, cell.file, ",",
                    config.sweep_key.value_or(""), ",",
                    cell.value.value_or(""), ",", cell.seed, "\n");
  }
  return WriteFile(out_dir / "manifest.csv", manifest);
}

absl::StatusOr<TradeoffReport> RunBoundReport(const ExperimentConfig& config,
                                              const ExperimentOptions& options,
                                              std::ostream& log) {
  auto run = config.run.Normalized();
  if (!run.ok()) return run.status();
  if (!(run->mu > 0.0)) {
    return absl::InvalidArgumentError("bound report needs train.mu > 0");
  }
  const std::filesystem::path out_dir =
      options.out_dir.value_or(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot create ", out_dir.string(), ": ", ec.message()));
  }
  auto data = PrepareData(config.dataset);
  if (!data.ok()) return data.status();
  auto parts = PartitionFor(*data, config.dataset, run->num_devices);
  if (!parts.ok()) return parts.status();
  auto optimum = SolveReferenceOptimum(data->shape, data->train, run->mu,
                                       {config.reference_tol});
  if (!optimum.ok()) return optimum.status();
  auto batch = EffectiveBatchSize(*run, *parts);
  if (!batch.ok()) return batch.status();

  const ModelState origin = ModelState::Zeros(data->shape);
  const std::vector<ModelState> probes = {origin, *optimum};
  ConstantsOptions copts;
  copts.batch_size = *batch;
  if (run->privacy.has_value()) copts.clip = run->privacy->clip;
  auto constants = EstimateConstants(data->shape, data->train, *parts,
                                     run->mu, probes, copts);
  if (!constants.ok()) return constants.status();
  const BoundOptions& b = config.bound;
  if (b.L) constants->L = *b.L;
  if (b.sigma_grad) constants->sigma_grad = *b.sigma_grad;
  if (b.lambda_het) constants->lambda_het = *b.lambda_het;
  if (b.G) constants->G = *b.G;

  const int64_t d = static_cast<int64_t>(data->shape.dim());
  double q = 0.0;
  double beta = static_cast<double>(RawBitCost(d));
  if (run->level.has_value()) {
    q = QFactor(d, *run->level);
    beta = static_cast<double>(BitCost(d, *run->level));
    if (q > 1.0) {
      log << "warning: q = " << q
          << " exceeds 1 for this level; bound evaluated with it anyway\n";
    }
  }

  size_t n_k = SIZE_MAX;
  for (const auto& p : *parts) n_k = std::min(n_k, p.size());
  double dist0 = 0.0;
  for (double v : optimum->params) dist0 += v * v;

  BoundSetting setting;
  setting.num_devices = run->num_devices;
  setting.total_iterations =
      b.total_iterations.value_or(*run->total_iterations);
  setting.q = q;
  setting.initial_dist_sq = dist0;
  setting.samples_per_device = static_cast<int64_t>(n_k);
  if (run->privacy.has_value()) {
    setting.epsilon = run->privacy->epsilon;
    setting.delta = run->privacy->delta;
  }
  CommBudget budget;
  if (b.budget_bits.has_value()) {
    budget.capacity_bps = *b.budget_bits;
    budget.duration_sec = 1.0;
  } else {
    budget.capacity_bps = b.capacity_bps;
    budget.duration_sec = b.duration_sec;
  }
  budget.beta_bits = beta;
  auto report = DominantTradeoff(*constants, setting, budget,
                                 b.max_local_steps.value_or(run->num_devices));
  if (!report.ok()) return report.status();

  log << absl::StrFormat(
      "constants: L=%g mu=%g sigma=%g lambda=%g G=%g b=%d d=%d; beta=%g "
      "q=%g alpha=%g\n",
      constants->L, constants->mu, constants->sigma_grad,
      constants->lambda_het, constants->G, constants->b, constants->d, beta, q,
      report->alpha);
  if (report->minimizer.has_value()) {
    const TradeoffRow& best = report->rows[*report->minimizer];
    log << absl::StrFormat("minimizer: E=%d M=%d K=%d bound=%.6g\n",
                           best.local_steps, best.participants, best.rounds,
                           best.bound.total);
  } else {
    log << "infeasible: no (E, M) pair fits the budget with M >= 1\n";
  }
  if (auto s = WriteFile(out_dir / "bound.csv", FormatBoundCsv(*report));
      !s.ok()) {
    return s;
  }
  return report;
}

int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return 0;
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kOutOfRange:
      return 2;
    case absl::StatusCode::kAborted:
      return 3;
    default:
      return 1;
  }
}

}  // namespace fedsim
