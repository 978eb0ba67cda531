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

#include "fedsim/config.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

extern char** environ;

namespace fedsim {
namespace {

bool ValidKey(absl::string_view key) {
  const size_t dot = key.find('.');
  if (dot == absl::string_view::npos || dot == 0 || dot + 1 == key.size()) {
    return false;
  }
  if (key.find('.', dot + 1) != absl::string_view::npos) return false;
  for (char c : key) {
    if (c != '.' && c != '_' && !std::isalnum(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  return true;
}

std::string Where(const ConfigFile::Entry& entry) {
  if (entry.line > 0) return absl::StrCat(entry.origin, ":", entry.line);
  return entry.origin.empty() ? std::string("<set>") : entry.origin;
}

absl::Status BadValue(absl::string_view key, absl::string_view value,
                      absl::string_view expected) {
  return absl::InvalidArgumentError(absl::StrCat(
      "bad value '", value, "' for ", key, ": expected ", expected));
}

absl::Status ParseInt(absl::string_view key, absl::string_view value,
                      int64_t& out) {
  if (!absl::SimpleAtoi(value, &out)) return BadValue(key, value, "integer");
  return absl::OkStatus();
}

absl::Status ParseInt(absl::string_view key, absl::string_view value, int& out) {
  if (!absl::SimpleAtoi(value, &out)) return BadValue(key, value, "integer");
  return absl::OkStatus();
}

absl::Status ParseUint(absl::string_view key, absl::string_view value,
                       uint64_t& out) {
  if (!absl::SimpleAtoi(value, &out)) {
    return BadValue(key, value, "nonnegative integer");
  }
  return absl::OkStatus();
}

absl::Status ParseDouble(absl::string_view key, absl::string_view value,
                         double& out) {
  if (!absl::SimpleAtod(value, &out)) return BadValue(key, value, "number");
  return absl::OkStatus();
}

absl::Status ParseBool(absl::string_view key, absl::string_view value,
                       bool& out) {
  if (!absl::SimpleAtob(value, &out)) return BadValue(key, value, "boolean");
  return absl::OkStatus();
}

template <typename T>
absl::Status ParseOptional(absl::string_view key, absl::string_view value,
                           std::optional<T>& out) {
  T v{};
  absl::Status s;
  if constexpr (std::is_same_v<T, double>) {
    s = ParseDouble(key, value, v);
  } else {
    s = ParseInt(key, value, v);
  }
  if (s.ok()) out = v;
  return s;
}

PrivacyConfig& Privacy(ExperimentConfig& config) {
  if (!config.run.privacy.has_value()) {
    config.run.privacy = PrivacyConfig{};
    config.run.privacy->gamma = 0.2;
  }
  return *config.run.privacy;
}

absl::Status ApplyKey(ExperimentConfig& config, absl::string_view key,
                      absl::string_view value) {
  RunConfig& run = config.run;
  DatasetManifest& data = config.dataset;
  BoundOptions& bound = config.bound;

  // federation.*
  if (key == "federation.algorithm") {
    auto algorithm = ParseAlgorithm(value);
    if (!algorithm.ok()) return algorithm.status();
    run.algorithm = *algorithm;
    return absl::OkStatus();
  }
  if (key == "federation.n") return ParseInt(key, value, run.num_devices);
  if (key == "federation.m") return ParseInt(key, value, run.participants);
  if (key == "federation.eta_g") return ParseDouble(key, value, run.eta_g);

  // train.*
  if (key == "train.e") return ParseInt(key, value, run.local_steps);
  if (key == "train.k") return ParseInt(key, value, run.rounds);
  if (key == "train.t") return ParseOptional(key, value, run.total_iterations);
  if (key == "train.b") return ParseInt(key, value, run.batch_size);
  if (key == "train.s") {
    if (absl::AsciiStrToLower(value) == "none") {
      run.level.reset();
      return absl::OkStatus();
    }
    return ParseOptional(key, value, run.level);
  }
  if (key == "train.eta0") return ParseDouble(key, value, run.eta0);
  if (key == "train.mu") return ParseDouble(key, value, run.mu);
  if (key == "train.seed") return ParseUint(key, value, run.seed);
  if (key == "train.lr_mode") {
    if (value == "experimental") {
      run.lr_mode = LrMode::kExperimental;
    } else if (value == "theoretical") {
      run.lr_mode = LrMode::kTheoretical;
    } else {
      return BadValue(key, value, "experimental or theoretical");
    }
    return absl::OkStatus();
  }
  if (key == "train.batch_sampling") {
    if (value == "with_replacement") {
      run.batch_sampling = BatchSampling::kWithReplacement;
    } else if (value == "subsample") {
      run.batch_sampling = BatchSampling::kSubsample;
    } else {
      return BadValue(key, value, "with_replacement or subsample");
    }
    return absl::OkStatus();
  }

  // privacy.*
  if (key == "privacy.epsilon") {
    return ParseDouble(key, value, Privacy(config).epsilon);
  }
  if (key == "privacy.delta") {
    return ParseDouble(key, value, Privacy(config).delta);
  }
  if (key == "privacy.clip") return ParseDouble(key, value, Privacy(config).clip);
  if (key == "privacy.gamma") {
    if (absl::AsciiStrToLower(value) == "none") {
      Privacy(config).gamma.reset();
      return absl::OkStatus();
    }
    return ParseOptional(key, value, Privacy(config).gamma);
  }
  if (key == "privacy.sensitivity") {
    if (value == "derived") {
      Privacy(config).sensitivity = SensitivityMode::Derived();
      return absl::OkStatus();
    }
    double v = 0.0;
    if (!absl::SimpleAtod(value, &v)) {
      return BadValue(key, value, "'derived' or a number");
    }
    Privacy(config).sensitivity = SensitivityMode::Fixed(v);
    return absl::OkStatus();
  }
  if (key == "privacy.sigma_sq") {
    return ParseOptional(key, value, Privacy(config).sigma_sq_override);
  }

  // dataset.*
  if (key == "dataset.source") {
    if (value == "synthetic") {
      data.source = DatasetManifest::Source::kSynthetic;
    } else if (value == "idx") {
      data.source = DatasetManifest::Source::kIdx;
    } else {
      return BadValue(key, value, "synthetic or idx");
    }
    return absl::OkStatus();
  }
  if (key == "dataset.n") return ParseInt(key, value, data.n);
  if (key == "dataset.u") return ParseInt(key, value, data.u);
  if (key == "dataset.classes") return ParseInt(key, value, data.classes);
  if (key == "dataset.separation") {
    return ParseDouble(key, value, data.separation);
  }
  if (key == "dataset.test_n") return ParseInt(key, value, data.test_n);
  if (key == "dataset.train_images") {
    data.train_images = std::string(value);
    return absl::OkStatus();
  }
  if (key == "dataset.train_labels") {
    data.train_labels = std::string(value);
    return absl::OkStatus();
  }
  if (key == "dataset.test_images") {
    data.test_images = std::string(value);
    return absl::OkStatus();
  }
  if (key == "dataset.test_labels") {
    data.test_labels = std::string(value);
    return absl::OkStatus();
  }
  if (key == "dataset.seed") return ParseUint(key, value, data.seed);
  if (key == "dataset.labels_per_device") {
    return ParseInt(key, value, data.labels_per_device);
  }
  if (key == "dataset.partition_seed") {
    uint64_t v = 0;
    auto s = ParseUint(key, value, v);
    if (s.ok()) data.partition_seed = v;
    return s;
  }
  if (key == "dataset.bias") return ParseBool(key, value, data.bias);

  // experiment.*
  if (key == "experiment.out_dir") {
    config.out_dir = std::string(value);
    return absl::OkStatus();
  }
  if (key == "experiment.repeats") return ParseInt(key, value, config.repeats);
  if (key == "experiment.sweep") {
    config.sweep_key = absl::AsciiStrToLower(value);
    return absl::OkStatus();
  }
  if (key == "experiment.values") {
    config.sweep_values.clear();
    for (absl::string_view v : absl::StrSplit(value, ',', absl::SkipEmpty())) {
      v = absl::StripAsciiWhitespace(v);
      if (!v.empty()) config.sweep_values.emplace_back(v);
    }
    return absl::OkStatus();
  }
  if (key == "experiment.reference_tol") {
    return ParseDouble(key, value, config.reference_tol);
  }

  // bound.* and constants.*
  if (key == "bound.capacity") return ParseDouble(key, value, bound.capacity_bps);
  if (key == "bound.duration") return ParseDouble(key, value, bound.duration_sec);
  if (key == "bound.budget_bits") {
    return ParseOptional(key, value, bound.budget_bits);
  }
  if (key == "bound.t") return ParseOptional(key, value, bound.total_iterations);
  if (key == "bound.e_max") {
    return ParseOptional(key, value, bound.max_local_steps);
  }
  if (key == "constants.l") return ParseOptional(key, value, bound.L);
  if (key == "constants.sigma") {
    return ParseOptional(key, value, bound.sigma_grad);
  }
  if (key == "constants.lambda") {
    return ParseOptional(key, value, bound.lambda_het);
  }
  if (key == "constants.g") return ParseOptional(key, value, bound.G);

  return absl::InvalidArgumentError(absl::StrCat("unknown key ", key));
}

}  // namespace

absl::StatusOr<ConfigFile> ConfigFile::Parse(absl::string_view text,
                                             absl::string_view origin) {
  ConfigFile file;
  int line_number = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_number;
    if (const size_t hash = line.find('#'); hash != absl::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(absl::StrCat(
          origin, ":", line_number, ": expected 'section.key = value'"));
    }
    const std::string key = absl::AsciiStrToLower(
        absl::StripAsciiWhitespace(line.substr(0, eq)));
    if (!ValidKey(key)) {
      return absl::InvalidArgumentError(absl::StrCat(
          origin, ":", line_number, ": malformed key '", key,
          "' (expected section.key)"));
    }
    file.entries_[key] = Entry{
        std::string(absl::StripAsciiWhitespace(line.substr(eq + 1))),
        line_number, std::string(origin)};
  }
  return file;
}

absl::StatusOr<ConfigFile> ConfigFile::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open config ", path));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str(), path);
}

void ConfigFile::ApplyEnvironment(
    const std::vector<std::pair<std::string, std::string>>& environment) {
  constexpr absl::string_view kPrefix = "FEDSIM_";
  for (const auto& [name, value] : environment) {
    if (!absl::StartsWith(name, kPrefix)) continue;
    const std::string rest = absl::AsciiStrToLower(name.substr(kPrefix.size()));
    const size_t sep = rest.find('_');
    if (sep == std::string::npos || sep == 0 || sep + 1 == rest.size()) {
      continue;
    }
    const std::string key =
        absl::StrCat(rest.substr(0, sep), ".", rest.substr(sep + 1));
    entries_[key] = Entry{value, 0, absl::StrCat("environment ", name)};
  }
}

std::vector<std::pair<std::string, std::string>>
ConfigFile::ProcessEnvironment() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
    absl::string_view entry(*env);
    const size_t eq = entry.find('=');
    if (eq == absl::string_view::npos) continue;
    out.emplace_back(std::string(entry.substr(0, eq)),
                     std::string(entry.substr(eq + 1)));
  }
  return out;
}

void ConfigFile::Set(absl::string_view key, std::string value) {
  entries_[absl::AsciiStrToLower(key)] = Entry{std::move(value), 0, "<set>"};
}

const ConfigFile::Entry* ConfigFile::Find(absl::string_view key) const {
  auto it = entries_.find(absl::AsciiStrToLower(key));
  return it == entries_.end() ? nullptr : &it->second;
}

absl::StatusOr<ExperimentConfig> BuildExperimentConfig(const ConfigFile& file) {
  ExperimentConfig config;
  config.run.batch_size = 10;
  for (const auto& [key, entry] : file.entries()) {
    if (auto s = ApplyKey(config, key, entry.value); !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(Where(entry), ": ", s.message()));
    }
  }
  if (file.Find("train.k") != nullptr && file.Find("train.t") != nullptr) {
    return absl::InvalidArgumentError(absl::StrCat(
        Where(*file.Find("train.t")),
        ": set either train.K or train.T, not both"));
  }
  if (config.run.algorithm == Algorithm::kDpFedPaq) Privacy(config);
  if (config.repeats < 1) {
    const ConfigFile::Entry* e = file.Find("experiment.repeats");
    return absl::InvalidArgumentError(absl::StrCat(
        e != nullptr ? Where(*e) : std::string("experiment.repeats"),
        ": repeats must be at least 1"));
  }
  if (config.sweep_key.has_value()) {
    const std::string& k = *config.sweep_key;
    const ConfigFile::Entry* e = file.Find("experiment.sweep");
    if (!absl::StartsWith(k, "federation.") && !absl::StartsWith(k, "train.") &&
        !absl::StartsWith(k, "privacy.")) {
      return absl::InvalidArgumentError(absl::StrCat(
          Where(*e), ": sweep parameter ", k,
          " must be a federation.*, train.* or privacy.* field"));
    }
    if (config.sweep_values.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat(Where(*e), ": sweep needs experiment.values"));
    }
    // Every value must be accepted by the field parser.
    for (const std::string& v : config.sweep_values) {
      ExperimentConfig probe = config;
      if (auto s = ApplyKey(probe, k, v); !s.ok()) {
        return absl::InvalidArgumentError(
            absl::StrCat(Where(*e), ": ", s.message()));
      }
    }
  }
  auto normalized = config.run.Normalized();
  if (!normalized.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid run settings: ", normalized.status().message()));
  }
  return config;
}

absl::Status ApplyRunSetting(ExperimentConfig& config, absl::string_view key,
                             absl::string_view value) {
  const std::string lowered = absl::AsciiStrToLower(key);
  if (!absl::StartsWith(lowered, "federation.") &&
      !absl::StartsWith(lowered, "train.") &&
      !absl::StartsWith(lowered, "privacy.")) {
    return absl::InvalidArgumentError(
        absl::StrCat(key, " is not a run or privacy field"));
  }
  return ApplyKey(config, lowered, value);
}

}  // namespace fedsim
