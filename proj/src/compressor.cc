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

#include "fedsim/compressor.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace fedsim {
namespace {

// Unsigned multi-precision integer, 32-bit limbs, least significant first.
class BigUint {
 public:
  BigUint() = default;
  explicit BigUint(uint32_t v) {
    if (v != 0) limbs_.push_back(v);
  }

  bool IsZero() const { return limbs_.empty(); }

  // *this = *this * mul + add.
  void MulAdd(uint32_t mul, uint32_t add) {
    uint64_t carry = add;
    for (uint32_t& limb : limbs_) {
      const uint64_t t = static_cast<uint64_t>(limb) * mul + carry;
      limb = static_cast<uint32_t>(t);
      carry = t >> 32;
    }
    if (carry != 0) limbs_.push_back(static_cast<uint32_t>(carry));
    Trim();
  }

  // *this /= divisor; returns the remainder.
  uint32_t DivMod(uint32_t divisor) {
    uint64_t rem = 0;
    for (size_t i = limbs_.size(); i-- > 0;) {
      const uint64_t cur = (rem << 32) | limbs_[i];
      limbs_[i] = static_cast<uint32_t>(cur / divisor);
      rem = cur % divisor;
    }
    Trim();
    return static_cast<uint32_t>(rem);
  }

  void SubtractOne() {
    for (uint32_t& limb : limbs_) {
      if (limb-- != 0) break;
    }
    Trim();
  }

  int64_t BitLength() const {
    if (limbs_.empty()) return 0;
    return 32 * static_cast<int64_t>(limbs_.size() - 1) +
           std::bit_width(limbs_.back());
  }

  // Big-endian into exactly `num_bytes` bytes; the value must fit.
  void WriteBigEndian(uint8_t* out, size_t num_bytes) const {
    std::memset(out, 0, num_bytes);
    for (size_t i = 0; i < limbs_.size(); ++i) {
      for (size_t byte = 0; byte < 4; ++byte) {
        const size_t pos = 4 * i + byte;
        if (pos >= num_bytes) break;
        out[num_bytes - 1 - pos] =
            static_cast<uint8_t>(limbs_[i] >> (8 * byte));
      }
    }
  }

  static BigUint ReadBigEndian(std::span<const uint8_t> in) {
    BigUint v;
    v.limbs_.assign((in.size() + 3) / 4, 0);
    for (size_t pos = 0; pos < in.size(); ++pos) {
      const uint8_t byte = in[in.size() - 1 - pos];
      v.limbs_[pos / 4] |= static_cast<uint32_t>(byte) << (8 * (pos % 4));
    }
    v.Trim();
    return v;
  }

 private:
  void Trim() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }

  std::vector<uint32_t> limbs_;
};

// Largest k with base^k < 2^32, and base^k.
std::pair<int, uint32_t> DigitsPerLimb(uint32_t base) {
  int k = 0;
  uint64_t power = 1;
  while (power * base <= 0xffffffffULL) {
    power *= base;
    ++k;
  }
  return {k, static_cast<uint32_t>(power)};
}

uint32_t Power(uint32_t base, int exp) {
  uint32_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Exact bit length of base^dim - 1, memoized per thread.
int64_t CodeFieldBits(size_t dim, int level) {
  thread_local std::map<std::pair<size_t, int>, int64_t> cache;
  const auto key = std::make_pair(dim, level);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const uint32_t base = 2 * static_cast<uint32_t>(level) + 1;
  const auto [per_limb, limb_power] = DigitsPerLimb(base);
  BigUint power(1);
  size_t remaining = dim;
  while (remaining >= static_cast<size_t>(per_limb)) {
    power.MulAdd(limb_power, 0);
    remaining -= per_limb;
  }
  if (remaining > 0) power.MulAdd(Power(base, static_cast<int>(remaining)), 0);
  power.SubtractOne();
  const int64_t bits = power.BitLength();
  cache.emplace(key, bits);
  return bits;
}

}  // namespace

QuantizedVector Quantize(std::span<const double> x, int level,
                         RngStream& rng) {
  QuantizedVector qv;
  qv.level = level;
  qv.codes.assign(x.size(), 0);
  double norm_sq = 0.0;
  for (double v : x) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm == 0.0) return qv;
  qv.norm = static_cast<float>(norm);
  for (size_t i = 0; i < x.size(); ++i) {
    const double scaled = std::abs(x[i]) / norm * level;
    int low = static_cast<int>(std::floor(scaled));
    low = std::min(low, level);
    const double p_up = scaled - low;
    int magnitude = low;
    if (low < level && rng.Uniform() < p_up) ++magnitude;
    qv.codes[i] = x[i] < 0.0 ? -magnitude : magnitude;
  }
  return qv;
}

std::vector<double> Dequantize(const QuantizedVector& qv) {
  std::vector<double> out(qv.codes.size());
  const double norm = qv.norm;
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = norm * qv.codes[i] / qv.level;
  }
  return out;
}

EncodedPayload Encode(const QuantizedVector& qv) {
  const uint32_t base = 2 * static_cast<uint32_t>(qv.level) + 1;
  const auto [per_limb, limb_power] = DigitsPerLimb(base);
  const size_t d = qv.codes.size();

  // Leading partial group first so the trailing groups are full.
  BigUint value;
  size_t i = 0;
  size_t group = d % per_limb;
  if (group == 0) group = per_limb;
  while (i < d) {
    uint32_t chunk = 0;
    for (size_t j = 0; j < group; ++j, ++i) {
      chunk = chunk * base + static_cast<uint32_t>(qv.codes[i] + qv.level);
    }
    value.MulAdd(group == static_cast<size_t>(per_limb)
                     ? limb_power
                     : Power(base, static_cast<int>(group)),
                 chunk);
    group = per_limb;
  }

  const int64_t code_bits = CodeFieldBits(d, qv.level);
  const size_t code_bytes = static_cast<size_t>((code_bits + 7) / 8);
  EncodedPayload out;
  out.bits = 32 + code_bits;
  out.bytes.resize(4 + code_bytes);
  const uint32_t norm_bits = std::bit_cast<uint32_t>(qv.norm);
  out.bytes[0] = static_cast<uint8_t>(norm_bits >> 24);
  out.bytes[1] = static_cast<uint8_t>(norm_bits >> 16);
  out.bytes[2] = static_cast<uint8_t>(norm_bits >> 8);
  out.bytes[3] = static_cast<uint8_t>(norm_bits);
  value.WriteBigEndian(out.bytes.data() + 4, code_bytes);
  return out;
}

absl::StatusOr<QuantizedVector> Decode(std::span<const uint8_t> bytes,
                                       size_t dim, int level) {
  if (level < 1) {
    return absl::InvalidArgumentError("Quantization level must be >= 1");
  }
  const int64_t code_bits = CodeFieldBits(dim, level);
  const size_t expected = 4 + static_cast<size_t>((code_bits + 7) / 8);
  if (bytes.size() < expected) {
    return absl::OutOfRangeError(absl::StrFormat(
        "Quantized payload has %d bytes, need %d", bytes.size(), expected));
  }
  if (bytes.size() > expected) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Quantized payload has %d trailing bytes", bytes.size() - expected));
  }
  QuantizedVector qv;
  qv.level = level;
  const uint32_t norm_bits = (static_cast<uint32_t>(bytes[0]) << 24) |
                             (static_cast<uint32_t>(bytes[1]) << 16) |
                             (static_cast<uint32_t>(bytes[2]) << 8) |
                             static_cast<uint32_t>(bytes[3]);
  qv.norm = std::bit_cast<float>(norm_bits);
  if (!std::isfinite(qv.norm) || qv.norm < 0.0f) {
    return absl::InvalidArgumentError("Quantized payload has an invalid norm");
  }

  const uint32_t base = 2 * static_cast<uint32_t>(level) + 1;
  const auto [per_limb, limb_power] = DigitsPerLimb(base);
  BigUint value = BigUint::ReadBigEndian(bytes.subspan(4));
  qv.codes.assign(dim, 0);
  size_t i = dim;
  while (i > 0) {
    const size_t group = std::min(i, static_cast<size_t>(per_limb));
    uint32_t chunk = value.DivMod(group == static_cast<size_t>(per_limb)
                                      ? limb_power
                                      : Power(base, static_cast<int>(group)));
    for (size_t j = 0; j < group; ++j) {
      --i;
      qv.codes[i] = static_cast<int32_t>(chunk % base) - level;
      chunk /= base;
    }
  }
  if (!value.IsZero()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Code field exceeds %d base-%d digits", dim, base));
  }
  if (qv.norm == 0.0f &&
      std::any_of(qv.codes.begin(), qv.codes.end(),
                  [](int32_t c) { return c != 0; })) {
    return absl::InvalidArgumentError("Zero norm with nonzero codes");
  }
  return qv;
}

int64_t BitCost(int64_t dim, int level) {
  const long double exact =
      static_cast<long double>(dim) * std::log2(2.0L * level + 1.0L);
  const long double nearest = std::round(exact);
  if (std::abs(exact - nearest) < 1e-6L) {
    return 32 + CodeFieldBits(static_cast<size_t>(dim), level);
  }
  return 32 + static_cast<int64_t>(std::ceil(exact));
}

double QFactor(int64_t dim, int level) {
  const double d = static_cast<double>(dim);
  const double s = static_cast<double>(level);
  return std::min(d / (s * s), std::sqrt(d) / s);
}

}  // namespace fedsim
