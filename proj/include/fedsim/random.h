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

#ifndef FEDSIM_RANDOM_H_
#define FEDSIM_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>

namespace fedsim {

// Tags separating the independent random streams used by a run. A stream is
// keyed by (master seed, purpose, device, round), so redrawing one device's
// batches never perturbs another device's noise or quantization.
enum class StreamPurpose : uint64_t {
  kSchedule = 1,
  kBatch = 2,
  kNoise = 3,
  kQuantize = 4,
  kPartition = 5,
  kSynthetic = 6,
  kProbe = 7,
};

// SplitMix64 finalizer.
uint64_t MixBits(uint64_t x);

uint64_t DeriveSeed(uint64_t master_seed, StreamPurpose purpose,
                    uint64_t device = 0, uint64_t round = 0);

class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  static RngStream For(uint64_t master_seed, StreamPurpose purpose,
                       uint64_t device = 0, uint64_t round = 0) {
    return RngStream(DeriveSeed(master_seed, purpose, device, round));
  }

  // Uniform on [0, 1).
  double Uniform();
  double Normal(double mean = 0.0, double stddev = 1.0);
  // Uniform on {0, ..., n - 1}; n must be positive.
  size_t Index(size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedsim

#endif  // FEDSIM_RANDOM_H_
