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


#ifndef MIXQ_EXECUTOR_HPP_
#define MIXQ_EXECUTOR_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "mixq/kernels.hpp"
#include "mixq/model_ir.hpp"
#include "mixq/quant.hpp"

namespace mixq {

// Bitwidth a kernel runs at: 5/6/7 are widened to 8, others unchanged.
int compute_bits(int bits);

struct QuantizedLayer {
  LayerBits bits;         // quantization bitwidths from the scheme
  QuantParams weight_q;   // per-tensor weight scale
  IntMatrix weight;       // [out, reduction] integer weights
  std::vector<float> bias;
};

struct QuantizedModel {
  QuantScheme scheme;
  std::vector<QuantizedLayer> layers;
};

QuantizedModel quantize_model(const NetworkIR& net, const QuantScheme& scheme);

// Per-layer record of one inference, used to check generated code.
struct LayerTrace {
  QuantParams act_q;
  std::vector<std::int32_t> acc;  // accumulators after the integer bias
};

// Reference integer inference of one input. Per layer: dynamic per-tensor
// activation quantization, integer kernel, integer bias
// round(b / (s_w * s_a)), then dequantize (float(acc) * (s_w * s_a)) and the
// layer activation. Returns the last layer's integer accumulators.
std::vector<std::int32_t> run_integer(const NetworkIR& net,
                                      const QuantizedModel& model,
                                      std::span<const float> input,
                                      KernelVariant variant = KernelVariant::kPacked,
                                      KernelStats* stats = nullptr,
                                      std::vector<LayerTrace>* trace = nullptr);

// Index of the first maximum.
std::size_t argmax(std::span<const std::int32_t> logits);

}  // namespace mixq

#endif  // MIXQ_EXECUTOR_HPP_
