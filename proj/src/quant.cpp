// Copyright 2026 The mixq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mixq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mixq/error.hpp"

namespace mixq {

std::int32_t qmax(int bits) {
  if (bits < 1 || bits > 8) {
    throw ValidationError("unsupported bitwidth " + std::to_string(bits));
  }
  return bits == 1 ? 1 : (std::int32_t{1} << (bits - 1)) - 1;
}

QuantParams compute_scale(std::span<const float> x, int bits) {
  const auto top = qmax(bits);
  QuantParams p{bits, 1.0f};
  if (x.empty()) return p;
  if (bits == 1) {
    float sum = 0.0f;
    for (float v : x) sum += std::fabs(v);
    const float mean = sum / static_cast<float>(x.size());
    if (mean > 0.0f) p.scale = mean;
    return p;
  }
  float max_abs = 0.0f;
  for (float v : x) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs > 0.0f) p.scale = max_abs / static_cast<float>(top);
  return p;
}

std::int32_t quantize_one(float x, const QuantParams& p) {
  if (p.bits == 1) return x >= 0.0f ? 1 : -1;
  const auto top = static_cast<float>(qmax(p.bits));
  const float r = std::round(x / p.scale);
  return static_cast<std::int32_t>(std::clamp(r, -top, top));
}

std::vector<std::int32_t> quantize(std::span<const float> x,
                                   const QuantParams& p) {
  if (!(p.scale > 0.0f)) throw ValidationError("quantization scale must be > 0");
  qmax(p.bits);
  std::vector<std::int32_t> q(x.size());
  std::transform(x.begin(), x.end(), q.begin(),
                 [&](float v) { return quantize_one(v, p); });
  return q;
}

std::vector<float> dequantize(std::span<const std::int32_t> q,
                              const QuantParams& p) {
  std::vector<float> x(q.size());
  std::transform(q.begin(), q.end(), x.begin(), [&](std::int32_t v) {
    return static_cast<float>(v) * p.scale;
  });
  return x;
}

std::vector<std::int32_t> quantize_bias(std::span<const float> bias,
                                        float acc_scale) {
  constexpr double kLimit = std::numeric_limits<std::int32_t>::max();
  std::vector<std::int32_t> out(bias.size());
  for (std::size_t i = 0; i < bias.size(); ++i) {
    const double r = std::round(static_cast<double>(bias[i] / acc_scale));
    out[i] = static_cast<std::int32_t>(std::clamp(r, -kLimit, kLimit));
  }
  return out;
}

FakeQuantResult fake_quant(std::span<const double> x, int bits) {
  const auto top = qmax(bits);
  FakeQuantResult r;
  r.values.resize(x.size());
  r.grad_mask.assign(x.size(), 1);
  if (x.empty()) return r;
  if (bits == 1) {
    double sum = 0.0;
    for (double v : x) sum += std::fabs(v);
    r.scale = sum > 0.0 ? sum / static_cast<double>(x.size()) : 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.values[i] = x[i] >= 0.0 ? r.scale : -r.scale;
      // hardtanh window
      r.grad_mask[i] = std::fabs(x[i]) <= 1.0 ? 1 : 0;
    }
    return r;
  }
  double max_abs = 0.0;
  for (double v : x) max_abs = std::max(max_abs, std::fabs(v));
  r.scale = max_abs > 0.0 ? max_abs / top : 1.0;
  const double limit = r.scale * top;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double q = std::clamp(std::round(x[i] / r.scale),
                                -static_cast<double>(top),
                                static_cast<double>(top));
    r.values[i] = q * r.scale;
    r.grad_mask[i] = std::fabs(x[i]) <= limit ? 1 : 0;
  }
  return r;
}

bool packable_bits(int bits) {
  return bits == 1 || bits == 2 || bits == 4 || bits == 8;
}

std::uint32_t encode_field(std::int32_t value, int bits) {
  if (bits == 1) {
    if (value == 1) return 0;
    if (value == -1) return 1;
    throw ValidationError("1-bit element must be +1 or -1, got " +
                          std::to_string(value));
  }
  const std::int32_t lo = -(std::int32_t{1} << (bits - 1));
  const std::int32_t hi = (std::int32_t{1} << (bits - 1)) - 1;
  if (value < lo || value > hi) {
    throw ValidationError("element " + std::to_string(value) +
                          " out of range for " + std::to_string(bits) +
                          "-bit packing");
  }
  const std::uint32_t mask = (std::uint32_t{1} << bits) - 1;
  return static_cast<std::uint32_t>(value) & mask;
}

std::int32_t decode_field(std::uint32_t field, int bits) {
  if (bits == 1) return (field & 1u) ? -1 : 1;
  const std::uint32_t mask = (std::uint32_t{1} << bits) - 1;
  const std::uint32_t sign = std::uint32_t{1} << (bits - 1);
  field &= mask;
  return static_cast<std::int32_t>(field ^ sign) - static_cast<std::int32_t>(sign);
}

PackedTensor pack(std::span<const std::int32_t> q, int bits) {
  if (!packable_bits(bits)) {
    throw ValidationError("packing supports 1, 2, 4 and 8 bits, got " +
                          std::to_string(bits));
  }
  PackedTensor out{bits, q.size(), {}};
  out.words.assign((q.size() * bits + 31) / 32, 0u);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::size_t bit = i * bits;
    out.words[bit / 32] |= encode_field(q[i], bits) << (bit % 32);
  }
  return out;
}

std::vector<std::int32_t> unpack(const PackedTensor& packed) {
  if (!packable_bits(packed.bits)) throw ValidationError("bad packed bitwidth");
  if (packed.words.size() * 32 < packed.len * packed.bits) {
    throw ValidationError("packed tensor too short for its length");
  }
  std::vector<std::int32_t> out(packed.len);
  for (std::size_t i = 0; i < packed.len; ++i) {
    const std::size_t bit = i * packed.bits;
    out[i] = decode_field(packed.words[bit / 32] >> (bit % 32), packed.bits);
  }
  return out;
}

}  // namespace mixq
