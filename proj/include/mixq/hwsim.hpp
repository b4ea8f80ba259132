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

#ifndef MIXQ_HWSIM_HPP_
#define MIXQ_HWSIM_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/model_ir.hpp"

namespace mixq {

enum class Archetype { kSystolic, kSimdCpu };
enum class CpuVariant { kTiny, kSmall, kHigh };

struct SystolicParams {
  int pe_rows = 32;
  int pe_cols = 16;
  double dma_cost_per_word = 0.05;
  double fixed_layer_cost = 500.0;
};

struct CpuParams {
  CpuVariant variant = CpuVariant::kSmall;
  double load_cost = 0.25;     // cycles per 32-bit word loaded
  std::int64_t dcache_bytes = 16384;  // 0: no data cache
  double cache_penalty = 4.0;  // load multiplier when weights miss the cache
  int issue_width = 1;
  double quant_cost = 2.0;     // cycles per input activation element
  double im2col_cost = 1.0;    // cycles per lowered patch element
  double fixed_layer_cost = 100.0;
};

// Parametric latency model of one target. The numeric defaults are
// calibration constants for desk-scale experiments, not measured data.
struct HwConfig {
  std::string id;
  Archetype archetype = Archetype::kSimdCpu;
  SystolicParams systolic;
  CpuParams cpu;

  static HwConfig cpu_tiny();
  static HwConfig cpu_small();
  static HwConfig cpu_high();
  static HwConfig systolic_32x16();

  void validate() const;
};

nlohmann::json to_json(const HwConfig& hw);
HwConfig hw_config_from_json(const nlohmann::json& j);
HwConfig load_hw_config(const std::filesystem::path& path);

// Bitwidth the target actually computes with: CPU rounds up to the next
// of {1,2,4,8}; the systolic array additionally runs 1-bit as 2-bit.
int effective_bits(int bits, const HwConfig& hw);

std::int64_t simulate_layer(const LayerDesc& layer, LayerBits bits,
                            const HwConfig& hw);
std::int64_t simulate(const NetworkIR& net, const QuantScheme& scheme,
                      const HwConfig& hw);

// Scalar reference implementation on the same CPU: one MAC per issue slot
// with 8-bit operands and no activation quantize/pack pass.
std::int64_t simulate_scalar_baseline(const LayerDesc& layer,
                                      const HwConfig& hw);

enum class KernelKind { kMatMul, kConv2D };

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& s);
KernelKind kernel_kind_of(const LayerDesc& layer);

// Matmul: {m, k, n}; Conv2D: {c, h, w, o, k, stride, pad}.
using KernelDims = std::map<std::string, std::int64_t>;

LayerDesc layer_from_dims(KernelKind kind, const KernelDims& dims);

struct ProfileRecord {
  KernelKind kernel = KernelKind::kMatMul;
  int bw = 8;
  int ba = 8;
  KernelDims dims;
  std::int64_t cycles = 0;
};

struct HardwareProfile {
  std::string hardware_id;
  std::vector<ProfileRecord> records;
};

nlohmann::json to_json(const HardwareProfile& p);
HardwareProfile profile_from_json(const nlohmann::json& j);
HardwareProfile load_profile(const std::filesystem::path& path);
void save_profile(const HardwareProfile& p, const std::filesystem::path& path);

struct BenchmarkPlan {
  std::vector<KernelDims> matmul;
  std::vector<KernelDims> conv2d;

  static BenchmarkPlan default_plan();
};

nlohmann::json to_json(const BenchmarkPlan& plan);
BenchmarkPlan plan_from_json(const nlohmann::json& j);
BenchmarkPlan load_plan(const std::filesystem::path& path);

// One record per (kernel, bitwidth combination, size). Combinations are the
// unordered pairs hi >= lo of `set`; for hi != lo the operand holding the
// wider value alternates between weights (even size index) and activations
// (odd size index) so both orientations are profiled.
HardwareProfile run_kernel_benchmarks(const HwConfig& hw,
                                      const BenchmarkPlan& plan,
                                      const BitwidthSet& set);

}  // namespace mixq

#endif  // MIXQ_HWSIM_HPP_
