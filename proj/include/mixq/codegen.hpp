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


#ifndef MIXQ_CODEGEN_HPP_
#define MIXQ_CODEGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/container.hpp"
#include "mixq/executor.hpp"
#include "mixq/model_ir.hpp"

namespace mixq {

// One named region of the arena, live over calls [first, last].
struct DeployBuffer {
  std::string name;
  std::size_t bytes = 0;
  int first = 0;
  int last = 0;
  std::size_t offset = 0;
};

// Buffer ids used by one layer call. -1 marks an unused slot.
struct CallBuffers {
  int input = -1;    // float activations in
  int qact = -1;     // int32 quantized activations
  int patches = -1;  // int32 im2col patches (conv only)
  int packed = -1;   // packed activation rows
  int acc = -1;      // int32 accumulators
  int output = -1;   // float activations out (absent on the last layer)
};

struct KernelCall {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::kLinear;
  Activation activation = Activation::kNone;
  LayerBits scheme_bits;  // as searched
  LayerBits bits;         // as executed
  std::int64_t m = 0, k = 0, n = 0, padded_k = 0;
  // Conv2D geometry.
  std::int64_t c = 0, h = 0, w = 0, kh = 0, kw = 0, stride = 1, pad = 0;
  float weight_scale = 1.0f;
  std::size_t weight_offset = 0;  // byte offset of the packed record in weights.bin
  CallBuffers buffers;
};

struct DeployPlan {
  std::string network;
  QuantScheme scheme;
  std::vector<std::int64_t> input_shape;
  std::int64_t input_count = 0;
  std::int64_t output_count = 0;
  std::vector<KernelCall> calls;
  std::vector<DeployBuffer> buffers;
  std::size_t arena_bytes = 0;
  std::vector<std::string> notes;
  // weights.bin records: per layer a packed weight (role 2) then a float
  // bias (role 1).
  std::vector<TensorRecord> weights;
};

inline constexpr std::size_t kArenaAlignment = 16;

// Places buffers first-fit in decreasing size order so that buffers with
// overlapping lifetimes never share bytes. Returns the arena size.
std::size_t allocate_arena(std::vector<DeployBuffer>& buffers);

DeployPlan build_plan(const NetworkIR& net, const QuantizedModel& model);
DeployPlan build_plan(const NetworkIR& net, const QuantScheme& scheme);

void validate_plan(const DeployPlan& plan);

// Executes the plan the way generated code does: every tensor lives in a
// single byte arena at its planned offset and weights come from the
// encoded weights binary. Returns the final integer accumulators.
std::vector<std::int32_t> run_plan(const DeployPlan& plan,
                                   std::span<const std::uint8_t> weights_bin,
                                   std::span<const float> input);

struct EmittedFile {
  std::string name;
  std::uint64_t bytes = 0;
  std::string fnv1a64;
};

// Writes model.h, model.c, main.c, mixq_rt.h, weights.bin, plan.json and
// manifest.json into out_dir. Output is byte-identical for identical plans.
std::vector<EmittedFile> emit_source(const DeployPlan& plan,
                                     const std::filesystem::path& out_dir);

// Input tensor file (role 5) read by the generated harness.
void write_input_tensor(const std::filesystem::path& path,
                        std::span<const std::int64_t> shape,
                        std::span<const float> values);

std::string runtime_header();

nlohmann::json to_json(const DeployPlan& plan);

std::string fnv1a64_hex(std::span<const std::uint8_t> bytes);

}  // namespace mixq

#endif  // MIXQ_CODEGEN_HPP_
