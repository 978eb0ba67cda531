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

#ifndef FEDSIM_DATASET_H_
#define FEDSIM_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/random.h"

namespace fedsim {

// Row-major n x u feature matrix with integer labels in [0, classes).
struct Dataset {
  size_t num_features = 0;
  int num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
  std::span<const double> row(size_t i) const {
    return {features.data() + i * num_features, num_features};
  }

  // Checks shape consistency, label range and finiteness.
  absl::Status Validate() const;
};

// Returns the samples at `indices` as a new dataset.
Dataset Subset(const Dataset& data, std::span<const size_t> indices);

struct DevicePartition {
  int device_id = 0;
  std::vector<size_t> sample_indices;

  size_t size() const { return sample_indices.size(); }
};

// ---------------------------------------------------------------------------
// IDX binary format (MNIST). Only unsigned-byte payloads are supported:
// magic 0x00000801 (1-D label vector) and 0x00000803 (3-D image tensor).
// ---------------------------------------------------------------------------

inline constexpr uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr uint32_t kIdxImageMagic = 0x00000803;

struct IdxTensor {
  uint32_t magic = 0;
  std::vector<uint32_t> dims;
  std::vector<uint8_t> values;

  size_t rank() const { return dims.size(); }
  // values / 255, in [0, 1].
  std::vector<double> Normalized() const;
};

absl::StatusOr<IdxTensor> ParseIdx(std::span<const uint8_t> bytes);
std::vector<uint8_t> SerializeIdx(const IdxTensor& tensor);

absl::StatusOr<IdxTensor> ReadIdxFile(const std::string& path);

// Joins an image file and a label file into a dataset with flattened,
// [0, 1]-scaled pixels and 10 classes (or max label + 1 if larger).
absl::StatusOr<Dataset> LoadIdxDataset(const std::string& images_path,
                                       const std::string& labels_path);

// ---------------------------------------------------------------------------
// Synthetic data and partitioning.
// ---------------------------------------------------------------------------

// Gaussian class clusters with unit covariance. Class means sit at pairwise
// distance `separation` when classes <= u; otherwise they are random
// directions at radius separation / sqrt(2). Labels are balanced (i mod
// classes), then the sample order is shuffled.
absl::StatusOr<Dataset> SynthClassification(size_t n, size_t u, int classes,
                                            double separation, uint64_t seed);

// Splits the dataset over `num_devices` devices so that each device only sees
// `labels_per_device` distinct labels.
//
// Construction: every device owns labels_per_device equally sized shards.
// Shard slots are dealt round-robin over a seeded permutation of the classes,
// so device i receives classes perm[(i * n_digits + j) mod classes]. The
// shard size is the largest value every class can honor; leftover samples
// are not assigned. With labels_per_device == classes the data is dealt IID
// and every sample is assigned (sizes within +/-1).
absl::StatusOr<std::vector<DevicePartition>> PartitionLabelSkew(
    const Dataset& data, int num_devices, int labels_per_device,
    uint64_t seed);

// Uniform sample of `size` distinct indices from the partition, in random
// order. Fails when size exceeds the partition.
absl::StatusOr<std::vector<size_t>> Subsample(const DevicePartition& partition,
                                              size_t size, RngStream& rng);

}  // namespace fedsim

#endif  // FEDSIM_DATASET_H_
