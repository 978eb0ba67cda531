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

#ifndef FEDSIM_COMPRESSOR_H_
#define FEDSIM_COMPRESSOR_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsim/random.h"

namespace fedsim {

// Stochastically quantized vector: entry i decodes to norm * codes[i] / level.
// The norm is held in single precision because that is what goes on the wire.
struct QuantizedVector {
  float norm = 0.0f;
  int level = 1;
  std::vector<int32_t> codes;

  size_t dim() const { return codes.size(); }
  bool operator==(const QuantizedVector&) const = default;
};

// Unbiased stochastic quantizer. With r = |x_i| / ||x|| and l = floor(r s),
// the code magnitude is l + 1 with probability r s - l and l otherwise; the
// sign of x_i is folded into the code.
QuantizedVector Quantize(std::span<const double> x, int level,
                         RngStream& rng);

std::vector<double> Dequantize(const QuantizedVector& qv);

struct EncodedPayload {
  std::vector<uint8_t> bytes;
  // Payload length before padding the code field to a byte boundary.
  int64_t bits = 0;
};

// Wire format: the norm as a big-endian IEEE-754 single, then the codes as
// base-(2s+1) digits (code + s, first coordinate most significant) of one
// unsigned integer written big-endian into ceil(d log2(2s+1)) bits, padded
// with leading zero bits to whole bytes.
EncodedPayload Encode(const QuantizedVector& qv);

// Dimension and level travel out of band.
absl::StatusOr<QuantizedVector> Decode(std::span<const uint8_t> bytes,
                                       size_t dim, int level);

// 32 + ceil(d log2(2s+1)).
int64_t BitCost(int64_t dim, int level);

// Bits for an uncompressed float32 update.
inline int64_t RawBitCost(int64_t dim) { return 32 * dim; }

// min(d / s^2, sqrt(d) / s). Can exceed 1 for coarse levels.
double QFactor(int64_t dim, int level);

}  // namespace fedsim

#endif  // FEDSIM_COMPRESSOR_H_
