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

#include "fedsim/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace fedsim {
namespace {

uint32_t ReadBigEndian32(std::span<const uint8_t> bytes, size_t offset) {
  return (static_cast<uint32_t>(bytes[offset]) << 24) |
         (static_cast<uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<uint32_t>(bytes[offset + 3]);
}

void AppendBigEndian32(uint32_t value, std::vector<uint8_t>& out) {
  out.push_back(static_cast<uint8_t>(value >> 24));
  out.push_back(static_cast<uint8_t>(value >> 16));
  out.push_back(static_cast<uint8_t>(value >> 8));
  out.push_back(static_cast<uint8_t>(value));
}

}  // namespace

absl::Status Dataset::Validate() const {
  if (labels.empty()) return absl::InvalidArgumentError("Dataset is empty");
  if (num_features == 0 || num_classes <= 0) {
    return absl::InvalidArgumentError(
        "Dataset needs at least one feature and one class");
  }
  if (features.size() != labels.size() * num_features) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Feature matrix has %d entries, expected %d x %d", features.size(),
        labels.size(), num_features));
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "Label %d of sample %d is outside [0, %d)", labels[i], i,
          num_classes));
    }
  }
  for (double v : features) {
    if (!std::isfinite(v)) {
      return absl::InvalidArgumentError("Dataset has a non-finite feature");
    }
  }
  return absl::OkStatus();
}

Dataset Subset(const Dataset& data, std::span<const size_t> indices) {
  Dataset out;
  out.num_features = data.num_features;
  out.num_classes = data.num_classes;
  out.features.reserve(indices.size() * data.num_features);
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    auto r = data.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

std::vector<double> IdxTensor::Normalized() const {
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = values[i] / 255.0;
  return out;
}

absl::StatusOr<IdxTensor> ParseIdx(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4) {
    return absl::OutOfRangeError(absl::StrFormat(
        "IDX header truncated: %d bytes, need at least 4", bytes.size()));
  }
  IdxTensor tensor;
  tensor.magic = ReadBigEndian32(bytes, 0);
  size_t rank;
  if (tensor.magic == kIdxLabelMagic) {
    rank = 1;
  } else if (tensor.magic == kIdxImageMagic) {
    rank = 3;
  } else {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Unsupported IDX magic 0x%08x (expected 0x00000801 or 0x00000803)",
        tensor.magic));
  }
  const size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    return absl::OutOfRangeError(absl::StrFormat(
        "IDX header truncated: %d bytes, need %d", bytes.size(), header));
  }
  uint64_t count = 1;
  for (size_t i = 0; i < rank; ++i) {
    tensor.dims.push_back(ReadBigEndian32(bytes, 4 + 4 * i));
    count *= tensor.dims.back();
  }
  if (bytes.size() - header != count) {
    return absl::OutOfRangeError(absl::StrFormat(
        "IDX payload has %d bytes, header implies %d", bytes.size() - header,
        count));
  }
  tensor.values.assign(bytes.begin() + header, bytes.end());
  return tensor;
}

std::vector<uint8_t> SerializeIdx(const IdxTensor& tensor) {
  std::vector<uint8_t> out;
  out.reserve(4 + 4 * tensor.dims.size() + tensor.values.size());
  AppendBigEndian32(tensor.magic, out);
  for (uint32_t d : tensor.dims) AppendBigEndian32(d, out);
  out.insert(out.end(), tensor.values.begin(), tensor.values.end());
  return out;
}

absl::StatusOr<IdxTensor> ReadIdxFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("Cannot open ", path));
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  auto tensor = ParseIdx(bytes);
  if (!tensor.ok()) {
    return absl::Status(tensor.status().code(),
                        absl::StrCat(path, ": ", tensor.status().message()));
  }
  return tensor;
}

absl::StatusOr<Dataset> LoadIdxDataset(const std::string& images_path,
                                       const std::string& labels_path) {
  auto images = ReadIdxFile(images_path);
  if (!images.ok()) return images.status();
  auto labels = ReadIdxFile(labels_path);
  if (!labels.ok()) return labels.status();
  if (images->magic != kIdxImageMagic || labels->magic != kIdxLabelMagic) {
    return absl::InvalidArgumentError(
        "Expected an image tensor and a label vector");
  }
  if (images->dims[0] != labels->dims[0]) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Image count %d does not match label count %d", images->dims[0],
        labels->dims[0]));
  }
  Dataset data;
  data.num_features = static_cast<size_t>(images->dims[1]) * images->dims[2];
  data.features = images->Normalized();
  int max_label = 0;
  for (uint8_t l : labels->values) {
    data.labels.push_back(l);
    max_label = std::max<int>(max_label, l);
  }
  data.num_classes = std::max(10, max_label + 1);
  if (auto s = data.Validate(); !s.ok()) return s;
  return data;
}

absl::StatusOr<Dataset> SynthClassification(size_t n, size_t u, int classes,
                                            double separation, uint64_t seed) {
  if (classes < 1 || u < 1 || n < static_cast<size_t>(classes)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Synthetic data needs n >= classes >= 1 and u >= 1 (n=%d u=%d "
        "classes=%d)",
        n, u, classes));
  }
  if (!(separation >= 0.0)) {
    return absl::InvalidArgumentError("Separation must be nonnegative");
  }
  RngStream rng = RngStream::For(seed, StreamPurpose::kSynthetic);
  const double radius = separation / std::sqrt(2.0);
  std::vector<double> means(static_cast<size_t>(classes) * u, 0.0);
  if (static_cast<size_t>(classes) <= u) {
    for (int c = 0; c < classes; ++c) means[c * u + c] = radius;
  } else {
    for (int c = 0; c < classes; ++c) {
      double norm_sq = 0.0;
      for (size_t j = 0; j < u; ++j) {
        means[c * u + j] = rng.Normal();
        norm_sq += means[c * u + j] * means[c * u + j];
      }
      const double scale = norm_sq > 0.0 ? radius / std::sqrt(norm_sq) : 0.0;
      for (size_t j = 0; j < u; ++j) means[c * u + j] *= scale;
    }
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  Dataset data;
  data.num_features = u;
  data.num_classes = classes;
  data.features.resize(n * u);
  data.labels.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(order[i] % classes);
    data.labels[i] = label;
    for (size_t j = 0; j < u; ++j) {
      data.features[i * u + j] = means[label * u + j] + rng.Normal();
    }
  }
  return data;
}

absl::StatusOr<std::vector<DevicePartition>> PartitionLabelSkew(
    const Dataset& data, int num_devices, int labels_per_device,
    uint64_t seed) {
  const int classes = data.num_classes;
  if (num_devices < 1) {
    return absl::InvalidArgumentError("Need at least one device");
  }
  if (labels_per_device < 1 || labels_per_device > classes) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "labels_per_device must lie in [1, %d], got %d", classes,
        labels_per_device));
  }
  RngStream rng = RngStream::For(seed, StreamPurpose::kPartition);
  std::vector<DevicePartition> parts(num_devices);
  for (int i = 0; i < num_devices; ++i) parts[i].device_id = i;

  if (labels_per_device == classes) {
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    if (order.size() < static_cast<size_t>(num_devices)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%d samples cannot cover %d devices", order.size(), num_devices));
    }
    for (size_t k = 0; k < order.size(); ++k) {
      parts[k % num_devices].sample_indices.push_back(order[k]);
    }
    return parts;
  }

  std::vector<std::vector<size_t>> by_class(classes);
  for (size_t i = 0; i < data.size(); ++i) {
    by_class[data.labels[i]].push_back(i);
  }
  for (auto& pool : by_class) std::shuffle(pool.begin(), pool.end(), rng.engine());

  std::vector<int> class_order(classes);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng.engine());

  const size_t total_slots =
      static_cast<size_t>(num_devices) * labels_per_device;
  std::vector<size_t> slots(classes, 0);
  for (size_t g = 0; g < total_slots; ++g) ++slots[class_order[g % classes]];

  size_t shard = SIZE_MAX;
  int limiting_class = -1;
  for (int c = 0; c < classes; ++c) {
    if (slots[c] == 0) continue;
    const size_t fit = by_class[c].size() / slots[c];
    if (fit < shard) {
      shard = fit;
      limiting_class = c;
    }
  }
  if (shard == 0) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "Class %d has %d samples, too few for its %d shards", limiting_class,
        by_class[limiting_class].size(), slots[limiting_class]));
  }

  std::vector<size_t> taken(classes, 0);
  for (int i = 0; i < num_devices; ++i) {
    for (int j = 0; j < labels_per_device; ++j) {
      const int c = class_order[(static_cast<size_t>(i) * labels_per_device + j) %
                                classes];
      auto begin = by_class[c].begin() + taken[c];
      parts[i].sample_indices.insert(parts[i].sample_indices.end(), begin,
                                     begin + shard);
      taken[c] += shard;
    }
  }
  return parts;
}

absl::StatusOr<std::vector<size_t>> Subsample(const DevicePartition& partition,
                                              size_t size, RngStream& rng) {
  const size_t n = partition.size();
  if (size > n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Subsample of %d requested from device %d holding %d samples "
        "(ratio > 1)",
        size, partition.device_id, n));
  }
  std::vector<size_t> pool = partition.sample_indices;
  // Partial Fisher-Yates: the first `size` slots form the sample.
  for (size_t k = 0; k < size; ++k) {
    const size_t j = k + rng.Index(n - k);
    std::swap(pool[k], pool[j]);
  }
  pool.resize(size);
  return pool;
}

}  // namespace fedsim
