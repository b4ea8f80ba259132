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

#include "mixq/hwsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "mixq/error.hpp"

namespace mixq {

using nlohmann::json;

namespace {

const char* variant_name(CpuVariant v) {
  switch (v) {
    case CpuVariant::kTiny: return "Tiny";
    case CpuVariant::kSmall: return "Small";
    case CpuVariant::kHigh: return "High";
  }
  return "?";
}

CpuVariant variant_from_string(const std::string& s) {
  if (s == "Tiny") return CpuVariant::kTiny;
  if (s == "Small") return CpuVariant::kSmall;
  if (s == "High") return CpuVariant::kHigh;
  throw ValidationError("unknown CPU variant '" + s + "'");
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t patch_elements(const LayerDesc& layer) {
  return layer.kind == LayerKind::kConv2D ? layer.rows() * layer.reduction() : 0;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

HwConfig HwConfig::cpu_tiny() {
  HwConfig hw;
  hw.id = "simd-cpu-tiny";
  hw.cpu = {CpuVariant::kTiny, 1.0, 0, 2.0, 1, 4.0, 2.0, 200.0};
  return hw;
}

HwConfig HwConfig::cpu_small() {
  HwConfig hw;
  hw.id = "simd-cpu-small";
  hw.cpu = {CpuVariant::kSmall, 0.25, 16384, 4.0, 1, 2.0, 1.0, 100.0};
  return hw;
}

HwConfig HwConfig::cpu_high() {
  HwConfig hw;
  hw.id = "simd-cpu-high";
  hw.cpu = {CpuVariant::kHigh, 0.125, 65536, 4.0, 2, 1.0, 0.5, 50.0};
  return hw;
}

HwConfig HwConfig::systolic_32x16() {
  HwConfig hw;
  hw.id = "systolic-32x16";
  hw.archetype = Archetype::kSystolic;
  hw.systolic = {32, 16, 0.05, 500.0};
  return hw;
}

void HwConfig::validate() const {
  if (archetype == Archetype::kSystolic) {
    const auto& s = systolic;
    if (s.pe_rows <= 0 || s.pe_cols <= 0 || !(s.dma_cost_per_word > 0) ||
        !(s.fixed_layer_cost > 0)) {
      throw ValidationError("systolic parameters must be positive");
    }
    return;
  }
  const auto& c = cpu;
  if (!(c.load_cost > 0) || c.dcache_bytes < 0 || !(c.cache_penalty > 0) ||
      c.issue_width <= 0 || !(c.quant_cost > 0) || !(c.im2col_cost > 0) ||
      !(c.fixed_layer_cost > 0)) {
    throw ValidationError("simd-cpu parameters must be positive");
  }
}

json to_json(const HwConfig& hw) {
  json j;
  j["id"] = hw.id;
  if (hw.archetype == Archetype::kSystolic) {
    j["archetype"] = "systolic";
    j["pe_rows"] = hw.systolic.pe_rows;
    j["pe_cols"] = hw.systolic.pe_cols;
    j["dma_cost_per_word"] = hw.systolic.dma_cost_per_word;
    j["fixed_layer_cost"] = hw.systolic.fixed_layer_cost;
  } else {
    j["archetype"] = "simd-cpu";
    j["variant"] = variant_name(hw.cpu.variant);
    j["load_cost"] = hw.cpu.load_cost;
    j["dcache_bytes"] = hw.cpu.dcache_bytes;
    j["cache_penalty"] = hw.cpu.cache_penalty;
    j["issue_width"] = hw.cpu.issue_width;
    j["quant_cost"] = hw.cpu.quant_cost;
    j["im2col_cost"] = hw.cpu.im2col_cost;
    j["fixed_layer_cost"] = hw.cpu.fixed_layer_cost;
  }
  return j;
}

HwConfig hw_config_from_json(const json& j) {
  HwConfig hw;
  try {
    const auto arch = j.at("archetype").get<std::string>();
    hw.id = j.value("id", arch);
    if (arch == "systolic") {
      hw.archetype = Archetype::kSystolic;
      auto& s = hw.systolic;
      s.pe_rows = j.value("pe_rows", s.pe_rows);
      s.pe_cols = j.value("pe_cols", s.pe_cols);
      s.dma_cost_per_word = j.value("dma_cost_per_word", s.dma_cost_per_word);
      s.fixed_layer_cost = j.value("fixed_layer_cost", s.fixed_layer_cost);
    } else if (arch == "simd-cpu") {
      hw.archetype = Archetype::kSimdCpu;
      const auto variant = variant_from_string(j.value("variant", "Small"));
      hw.cpu = variant == CpuVariant::kTiny   ? HwConfig::cpu_tiny().cpu
               : variant == CpuVariant::kHigh ? HwConfig::cpu_high().cpu
                                              : HwConfig::cpu_small().cpu;
      auto& c = hw.cpu;
      c.load_cost = j.value("load_cost", c.load_cost);
      c.dcache_bytes = j.value("dcache_bytes", c.dcache_bytes);
      c.cache_penalty = j.value("cache_penalty", c.cache_penalty);
      c.issue_width = j.value("issue_width", c.issue_width);
      c.quant_cost = j.value("quant_cost", c.quant_cost);
      c.im2col_cost = j.value("im2col_cost", c.im2col_cost);
      c.fixed_layer_cost = j.value("fixed_layer_cost", c.fixed_layer_cost);
    } else {
      throw ValidationError("unknown archetype '" + arch + "'");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("hardware config: ") + e.what());
  }
  hw.validate();
  return hw;
}

HwConfig load_hw_config(const std::filesystem::path& path) {
  return hw_config_from_json(read_json(path));
}

int effective_bits(int bits, const HwConfig& hw) {
  if (bits < 1 || bits > 8) {
    throw ValidationError("unsupported bitwidth " + std::to_string(bits));
  }
  int eff = bits <= 1 ? 1 : bits <= 2 ? 2 : bits <= 4 ? 4 : 8;
  if (hw.archetype == Archetype::kSystolic && eff == 1) eff = 2;
  return eff;
}

std::int64_t simulate_layer(const LayerDesc& layer, LayerBits bits,
                            const HwConfig& hw) {
  const int bw = effective_bits(bits.w, hw);
  const int ba = effective_bits(bits.a, hw);
  const double macs = static_cast<double>(layer.macs);
  const double load_bits = static_cast<double>(bw + ba) * macs;

  if (hw.archetype == Archetype::kSystolic) {
    const auto& s = hw.systolic;
    const std::int64_t compute = ceil_div(
        layer.macs * bw * ba, std::int64_t{s.pe_rows} * s.pe_cols * 64);
    const double dma = s.dma_cost_per_word *
                       (load_bits + 32.0 * static_cast<double>(layer.output_count())) /
                       32.0;
    return compute +
           static_cast<std::int64_t>(std::ceil(dma + s.fixed_layer_cost));
  }

  const auto& c = hw.cpu;
  const int lanes = 32 / std::max(bw, ba);
  const std::int64_t compute =
      ceil_div(ceil_div(layer.macs, lanes), c.issue_width);
  const double weight_bytes = static_cast<double>(layer.weight_count) * bw / 8.0;
  const double penalty =
      weight_bytes > static_cast<double>(c.dcache_bytes) ? c.cache_penalty : 1.0;
  const double rest =
      c.load_cost * load_bits / 32.0 * penalty +
      c.quant_cost * static_cast<double>(layer.activation_count) +
      c.im2col_cost * static_cast<double>(patch_elements(layer)) +
      c.fixed_layer_cost;
  return compute + static_cast<std::int64_t>(std::ceil(rest));
}

std::int64_t simulate(const NetworkIR& net, const QuantScheme& scheme,
                      const HwConfig& hw) {
  if (scheme.size() != net.size()) {
    throw ValidationError("scheme length does not match network");
  }
  std::int64_t total = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    total += simulate_layer(net.layers[i], scheme.pairs[i], hw);
  }
  return total;
}

std::int64_t simulate_scalar_baseline(const LayerDesc& layer,
                                      const HwConfig& hw) {
  if (hw.archetype != Archetype::kSimdCpu) {
    throw ValidationError("scalar baseline is defined for simd-cpu targets");
  }
  const auto& c = hw.cpu;
  const std::int64_t compute = ceil_div(layer.macs, c.issue_width);
  const double weight_bytes = static_cast<double>(layer.weight_count);
  const double penalty =
      weight_bytes > static_cast<double>(c.dcache_bytes) ? c.cache_penalty : 1.0;
  const double rest =
      c.load_cost * 16.0 * static_cast<double>(layer.macs) / 32.0 * penalty +
      c.im2col_cost * static_cast<double>(patch_elements(layer)) +
      c.fixed_layer_cost;
  return compute + static_cast<std::int64_t>(std::ceil(rest));
}

const char* to_string(KernelKind kind) {
  return kind == KernelKind::kConv2D ? "conv2d" : "matmul";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "matmul") return KernelKind::kMatMul;
  if (s == "conv2d") return KernelKind::kConv2D;
  throw ValidationError("unknown kernel kind '" + s + "'");
}

KernelKind kernel_kind_of(const LayerDesc& layer) {
  return layer.kind == LayerKind::kConv2D ? KernelKind::kConv2D
                                          : KernelKind::kMatMul;
}

LayerDesc layer_from_dims(KernelKind kind, const KernelDims& dims) {
  auto get = [&](const char* key, std::optional<std::int64_t> fallback =
                                      std::nullopt) -> std::int64_t {
    const auto it = dims.find(key);
    if (it != dims.end()) return it->second;
    if (fallback) return *fallback;
    throw ValidationError(std::string("kernel dims missing '") + key + "'");
  };
  if (kind == KernelKind::kMatMul) {
    const auto m = get("m", 1);
    return make_linear(get("k"), get("n"), m > 1 ? m : 0);
  }
  return make_conv2d(get("c"), get("h"), get("w"), get("o"), get("k"),
                     get("stride", 1), get("pad", 0));
}

json to_json(const HardwareProfile& p) {
  json j;
  j["hardware_id"] = p.hardware_id;
  j["records"] = json::array();
  for (const auto& r : p.records) {
    j["records"].push_back({{"kernel", to_string(r.kernel)},
                            {"bw", r.bw},
                            {"ba", r.ba},
                            {"dims", r.dims},
                            {"cycles", r.cycles}});
  }
  return j;
}

HardwareProfile profile_from_json(const json& j) {
  HardwareProfile p;
  try {
    p.hardware_id = j.value("hardware_id", std::string{});
    for (const auto& jr : j.at("records")) {
      ProfileRecord r;
      r.kernel = kernel_kind_from_string(jr.at("kernel").get<std::string>());
      r.bw = jr.at("bw").get<int>();
      r.ba = jr.at("ba").get<int>();
      r.dims = jr.at("dims").get<KernelDims>();
      r.cycles = jr.at("cycles").get<std::int64_t>();
      if (r.cycles <= 0) throw ValidationError("profile cycles must be > 0");
      p.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("profile: ") + e.what());
  }
  return p;
}

HardwareProfile load_profile(const std::filesystem::path& path) {
  return profile_from_json(read_json(path));
}

void save_profile(const HardwareProfile& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(p).dump(2) << "\n";
}

BenchmarkPlan BenchmarkPlan::default_plan() {
  BenchmarkPlan plan;
  plan.matmul = {{{"m", 16}, {"k", 64}, {"n", 64}},
                 {{"m", 32}, {"k", 128}, {"n", 128}},
                 {{"m", 64}, {"k", 256}, {"n", 256}}};
  plan.conv2d = {
      {{"c", 3}, {"h", 16}, {"w", 16}, {"o", 16}, {"k", 3}, {"stride", 1}, {"pad", 1}},
      {{"c", 16}, {"h", 16}, {"w", 16}, {"o", 32}, {"k", 3}, {"stride", 1}, {"pad", 1}},
      {{"c", 32}, {"h", 8}, {"w", 8}, {"o", 64}, {"k", 3}, {"stride", 1}, {"pad", 1}}};
  return plan;
}

json to_json(const BenchmarkPlan& plan) {
  return {{"matmul", plan.matmul}, {"conv2d", plan.conv2d}};
}

BenchmarkPlan plan_from_json(const json& j) {
  BenchmarkPlan plan;
  try {
    if (j.contains("matmul")) plan.matmul = j["matmul"].get<std::vector<KernelDims>>();
    if (j.contains("conv2d")) plan.conv2d = j["conv2d"].get<std::vector<KernelDims>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("benchmark plan: ") + e.what());
  }
  return plan;
}

BenchmarkPlan load_plan(const std::filesystem::path& path) {
  return plan_from_json(read_json(path));
}

HardwareProfile run_kernel_benchmarks(const HwConfig& hw,
                                      const BenchmarkPlan& plan,
                                      const BitwidthSet& set) {
  hw.validate();
  if (plan.matmul.empty() && plan.conv2d.empty()) {
    throw ValidationError("benchmark plan is empty");
  }
  HardwareProfile profile;
  profile.hardware_id = hw.id;
  auto run = [&](KernelKind kind, const std::vector<KernelDims>& sizes) {
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      const auto layer = layer_from_dims(kind, sizes[s]);
      for (std::size_t i = set.bits.size(); i-- > 0;) {
        for (std::size_t k = i + 1; k-- > 0;) {
          const int hi = set.bits[i], lo = set.bits[k];
          const LayerBits bits =
              s % 2 == 0 ? LayerBits{hi, lo} : LayerBits{lo, hi};
          profile.records.push_back({kind, bits.w, bits.a, sizes[s],
                                     simulate_layer(layer, bits, hw)});
        }
      }
    }
  };
  run(KernelKind::kMatMul, plan.matmul);
  run(KernelKind::kConv2D, plan.conv2d);
  return profile;
}

}  // namespace mixq
