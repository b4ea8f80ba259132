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


#include "mixq/executor.hpp"

#include <algorithm>

#include "mixq/error.hpp"

namespace mixq {

int compute_bits(int bits) { return bits >= 5 && bits <= 7 ? 8 : bits; }

QuantizedModel quantize_model(const NetworkIR& net, const QuantScheme& scheme) {
  validate_scheme(scheme, net);
  if (!net.has_weights()) {
    throw ValidationError("network '" + net.name + "' has no weights");
  }
  QuantizedModel qm;
  qm.scheme = scheme;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const auto& lw = net.weights.layers[i];
    QuantizedLayer ql;
    ql.bits = scheme.pairs[i];
    ql.weight_q = compute_scale(lw.weight.data, ql.bits.w);
    ql.weight.rows = static_cast<std::size_t>(layer.out_channels());
    ql.weight.cols = static_cast<std::size_t>(layer.reduction());
    ql.weight.data = quantize(lw.weight.data, ql.weight_q);
    ql.bias = lw.bias.data;
    if (ql.bias.empty()) ql.bias.assign(ql.weight.rows, 0.0f);
    qm.layers.push_back(std::move(ql));
  }
  return qm;
}

std::vector<std::int32_t> run_integer(const NetworkIR& net,
                                      const QuantizedModel& model,
                                      std::span<const float> input,
                                      KernelVariant variant, KernelStats* stats,
                                      std::vector<LayerTrace>* trace) {
  if (model.layers.size() != net.layers.size()) {
    throw ValidationError("quantized model does not match network");
  }
  std::vector<float> x(input.begin(), input.end());
  std::vector<std::int32_t> acc;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const auto& ql = model.layers[i];
    if (static_cast<std::int64_t>(x.size()) != layer.activation_count) {
      throw ValidationError("layer " + std::to_string(i) + " expects " +
                            std::to_string(layer.activation_count) +
                            " inputs, got " + std::to_string(x.size()));
    }
    const auto act_q = compute_scale(x, ql.bits.a);
    const auto qx = quantize(x, act_q);
    const int wb = compute_bits(ql.bits.w), ab = compute_bits(ql.bits.a);

    const auto out_ch = static_cast<std::size_t>(layer.out_channels());
    const auto spatial = static_cast<std::size_t>(layer.rows());
    if (layer.kind == LayerKind::kConv2D) {
      auto [out, st] = conv2d(qx, ql.weight, layer, wb, ab, variant);
      acc = std::move(out);  // [O, OH, OW]
      if (stats) *stats += st;
    } else {
      IntMatrix a(spatial, static_cast<std::size_t>(layer.reduction()));
      a.data = qx;
      auto [out, st] = matmul(a, ql.weight, ab, wb, variant);
      acc = std::move(out.data);  // [rows, out]
      if (stats) *stats += st;
    }

    const float acc_scale = ql.weight_q.scale * act_q.scale;
    const auto qb = quantize_bias(ql.bias, acc_scale);
    for (std::size_t j = 0; j < acc.size(); ++j) {
      const std::size_t ch = layer.kind == LayerKind::kConv2D ? j / spatial : j % out_ch;
      const std::int64_t v = static_cast<std::int64_t>(acc[j]) + qb[ch];
      if (v > INT32_MAX || v < INT32_MIN) {
        throw OverflowError("bias add overflows int32 in layer " + std::to_string(i));
      }
      acc[j] = static_cast<std::int32_t>(v);
    }
    if (trace) trace->push_back({act_q, acc});

    x.resize(acc.size());
    for (std::size_t j = 0; j < acc.size(); ++j) {
      float v = static_cast<float>(acc[j]) * acc_scale;
      if (layer.activation == Activation::kRelu) v = std::max(v, 0.0f);
      x[j] = v;
    }
  }
  return acc;
}

std::size_t argmax(std::span<const std::int32_t> logits) {
  if (logits.empty()) throw ValidationError("argmax of empty logits");
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

}  // namespace mixq
