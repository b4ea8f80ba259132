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

#ifndef MIXQ_QUANT_HPP_
#define MIXQ_QUANT_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace mixq {

// Symmetric per-tensor quantization. For bits >= 2 the integer range is
// restricted to [-(2^(b-1)-1), 2^(b-1)-1]; 1-bit values are {-1, +1}.
struct QuantParams {
  int bits = 8;
  float scale = 1.0f;
};

// Largest representable magnitude at `bits` (1 for binarized values).
std::int32_t qmax(int bits);

// max|x| / qmax(bits) for bits >= 2, mean|x| for bits == 1; 1 when x is
// all zeros.
QuantParams compute_scale(std::span<const float> x, int bits);

// Half-away-from-zero rounding of x/scale, clamped to the symmetric range.
// 1-bit: +1 for x >= 0, -1 otherwise.
std::vector<std::int32_t> quantize(std::span<const float> x,
                                   const QuantParams& p);
std::int32_t quantize_one(float x, const QuantParams& p);

std::vector<float> dequantize(std::span<const std::int32_t> q,
                              const QuantParams& p);

// Bias folding into the int32 accumulator domain with scale s_w * s_a.
std::vector<std::int32_t> quantize_bias(std::span<const float> bias,
                                        float acc_scale);

// Forward pass of quantize-dequantize in double precision plus the
// straight-through-estimator mask: grad_mask[i] is 1 where the incoming
// gradient passes unchanged, 0 where it is blocked.
struct FakeQuantResult {
  std::vector<double> values;
  std::vector<std::uint8_t> grad_mask;
  double scale = 1.0;
};

FakeQuantResult fake_quant(std::span<const double> x, int bits);

// Sub-byte packing into little-endian 32-bit words. Element i lives in
// bits [(i*bits) % 32, +bits) of word (i*bits)/32. Fields hold two's
// complement values; 1-bit fields encode +1 as 0 and -1 as 1.
struct PackedTensor {
  int bits = 8;
  std::size_t len = 0;
  std::vector<std::uint32_t> words;
};

bool packable_bits(int bits);  // {1, 2, 4, 8}

std::uint32_t encode_field(std::int32_t value, int bits);
std::int32_t decode_field(std::uint32_t field, int bits);

PackedTensor pack(std::span<const std::int32_t> q, int bits);
std::vector<std::int32_t> unpack(const PackedTensor& packed);

}  // namespace mixq

#endif  // MIXQ_QUANT_HPP_
