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

#ifndef MIXQ_MODEL_IR_HPP_
#define MIXQ_MODEL_IR_HPP_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mixq {

enum class LayerKind { kConv2D, kLinear };

// Elementwise activation applied to a layer's dequantized output.
enum class Activation { kNone, kRelu };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

// One layer of a sequential network. Batch size is fixed to 1; a Linear
// layer may carry a leading row dimension (tokens) in which case every row
// is an independent batch-row of the same weight matrix.
struct LayerDesc {
  std::size_t index = 0;
  LayerKind kind = LayerKind::kLinear;
  Activation activation = Activation::kNone;

  // Linear: [in_features] or [rows, in_features]; Conv2D: [C, H, W].
  std::vector<std::int64_t> in_shape;
  // Linear: [out_features] or [rows, out_features]; Conv2D: [O, OH, OW].
  std::vector<std::int64_t> out_shape;
  // Conv2D only.
  std::int64_t kernel_h = 0;
  std::int64_t kernel_w = 0;
  std::int64_t stride = 1;
  std::int64_t pad = 0;

  std::int64_t macs = 0;
  std::int64_t weight_count = 0;
  std::int64_t activation_count = 0;

  std::int64_t rows() const;          // GEMM M: batch rows or output pixels
  std::int64_t reduction() const;     // GEMM K: in_features or C*kh*kw
  std::int64_t out_channels() const;  // GEMM N
  std::int64_t output_count() const;
  std::vector<std::int64_t> weight_shape() const;
};

// Builds a fully populated LayerDesc from its geometry. Throws
// ValidationError on inconsistent shapes.
LayerDesc make_linear(std::int64_t in_features, std::int64_t out_features,
                      std::int64_t rows = 0,
                      Activation act = Activation::kNone);
LayerDesc make_conv2d(std::int64_t in_ch, std::int64_t in_h, std::int64_t in_w,
                      std::int64_t out_ch, std::int64_t kernel,
                      std::int64_t stride = 1, std::int64_t pad = 0,
                      Activation act = Activation::kNone);

// Recomputes out-shape derived counters and checks shape consistency.
void finalize_layer(LayerDesc& layer);

struct Tensor {
  std::vector<std::int64_t> dims;
  std::vector<float> data;

  std::int64_t numel() const;
};

struct LayerWeights {
  Tensor weight;
  Tensor bias;
};

// Float parameters, indexed by layer position.
struct WeightStore {
  std::vector<LayerWeights> layers;

  bool empty() const { return layers.empty(); }
};

struct NetworkIR {
  std::string name;
  std::vector<LayerDesc> layers;
  WeightStore weights;
  std::string dataset;
  double float_accuracy = 0.0;

  std::size_t size() const { return layers.size(); }
  std::int64_t total_macs() const;
  bool has_weights() const { return !weights.empty(); }
};

// Checks sequential chaining and, when weights are present, tensor shapes.
void validate_network(const NetworkIR& net);

NetworkIR load_network(const std::filesystem::path& path);
// Writes the JSON description and, if the network has weights, a weights
// binary next to it named `<stem>.weights.bin`.
void save_network(const NetworkIR& net, const std::filesystem::path& path);

// Per-layer (weight bits, activation bits).
struct LayerBits {
  int w = 8;
  int a = 8;

  friend auto operator<=>(const LayerBits&, const LayerBits&) = default;
};

struct BitwidthSet {
  std::vector<int> bits;  // ascending, unique

  static BitwidthSet ptq();  // {4,5,6,7,8}
  static BitwidthSet qat();  // {1,2,4,8}
  static BitwidthSet from(std::vector<int> bits);

  int min() const { return bits.front(); }
  int max() const { return bits.back(); }
  bool contains(int b) const;
  // Every (w, a) combination, row-major over weight bits.
  std::vector<LayerBits> pairs() const;
};

struct QuantScheme {
  std::vector<LayerBits> pairs;

  std::size_t size() const { return pairs.size(); }
  std::string to_string() const;

  friend auto operator<=>(const QuantScheme&, const QuantScheme&) = default;
};

void validate_scheme(const QuantScheme& scheme, std::size_t num_layers,
                     const BitwidthSet& set);
void validate_scheme(const QuantScheme& scheme, const NetworkIR& net);

QuantScheme scheme_uniform(const NetworkIR& net, int bits,
                           const BitwidthSet& set);

}  // namespace mixq

#endif  // MIXQ_MODEL_IR_HPP_
