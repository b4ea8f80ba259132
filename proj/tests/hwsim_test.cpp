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

#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "mixq/error.hpp"
#include "mixq/hwsim.hpp"
#include "test_support.hpp"

namespace mixq {
namespace {

HwConfig tiny_unit_costs() {
  auto hw = HwConfig::cpu_tiny();
  hw.cpu.load_cost = 1.0;
  hw.cpu.quant_cost = 1.0;
  hw.cpu.im2col_cost = 1.0;
  hw.cpu.fixed_layer_cost = 100.0;
  hw.cpu.cache_penalty = 2.0;
  return hw;
}

TEST(HwsimTest, TinyLinearFormula) {
  const auto layer = make_linear(32, 32);
  ASSERT_EQ(layer.macs, 1024);
  const auto hw = tiny_unit_costs();
  // mac 1024/4 = 256; loads (8+8)*1024/32 * penalty 2 (no cache) = 1024;
  // quant 32 inputs; fixed 100.
  EXPECT_EQ(simulate_layer(layer, {8, 8}, hw), 256 + 1024 + 32 + 100);
  // lanes = 32: mac term 32, loads (1+1)*1024/32*2 = 128.
  EXPECT_EQ(simulate_layer(layer, {1, 1}, hw), 32 + 128 + 32 + 100);
  EXPECT_LT(simulate_layer(layer, {1, 1}, hw), simulate_layer(layer, {8, 8}, hw));
}

TEST(HwsimTest, SystolicComputeTerm) {
  const auto layer = make_linear(1000, 1000);
  ASSERT_EQ(layer.macs, 1000000);
  const auto hw = HwConfig::systolic_32x16();
  const std::int64_t compute = (64'000'000 + 32768 - 1) / 32768;
  EXPECT_EQ(compute, 1954);
  const double dma = 0.05 * (16.0e6 + 32.0 * 1000) / 32.0;
  EXPECT_EQ(simulate_layer(layer, {8, 8}, hw),
            compute + static_cast<std::int64_t>(std::ceil(dma + 500.0)));
  // 1-bit runs as 2-bit on the array.
  EXPECT_EQ(simulate_layer(layer, {1, 1}, hw), simulate_layer(layer, {2, 2}, hw));
}

TEST(HwsimTest, ConvChargesIm2col) {
  const auto layer = make_conv2d(2, 6, 6, 4, 3);
  auto hw = tiny_unit_costs();
  const auto with = simulate_layer(layer, {8, 8}, hw);
  hw.cpu.im2col_cost = 2.0;
  EXPECT_EQ(simulate_layer(layer, {8, 8}, hw) - with,
            layer.rows() * layer.reduction());
}

TEST(HwsimTest, NonPowerOfTwoWidthsCostAsEightBitOnCpu) {
  const auto layer = make_linear(128, 64);
  for (auto hw : {HwConfig::cpu_tiny(), HwConfig::cpu_small(), HwConfig::cpu_high()}) {
    for (int b : {5, 6, 7}) {
      EXPECT_EQ(simulate_layer(layer, {b, b}, hw), simulate_layer(layer, {8, 8}, hw));
      EXPECT_EQ(simulate_layer(layer, {b, 4}, hw), simulate_layer(layer, {8, 4}, hw));
    }
  }
}

TEST(HwsimTest, CacheCreatesLatencyStep) {
  auto hw = HwConfig::cpu_small();
  // 16384 weights: 8-bit = 16 KiB fits exactly, but 8-bit on a slightly
  // larger layer does not.
  const auto fits = make_linear(128, 128);
  const auto spills = make_linear(256, 128);
  const auto per_mac = [&](const LayerDesc& l) {
    return static_cast<double>(simulate_layer(l, {8, 8}, hw)) /
           static_cast<double>(l.macs);
  };
  EXPECT_GT(per_mac(spills), 1.5 * per_mac(fits));
  // The same layer at 4-bit weights falls back under the cache size.
  EXPECT_LT(simulate_layer(spills, {4, 8}, hw) * 2,
            simulate_layer(spills, {8, 8}, hw));
}

TEST(HwsimTest, DominanceOverRandomLayers) {
  std::mt19937_64 rng(51);
  const std::vector<int> bits = {1, 2, 4, 5, 6, 7, 8};
  const std::vector<HwConfig> targets = {HwConfig::cpu_tiny(), HwConfig::cpu_small(),
                                         HwConfig::cpu_high(),
                                         HwConfig::systolic_32x16()};
  for (int t = 0; t < 40; ++t) {
    const auto layer =
        t % 2 ? make_linear(8 + rng() % 300, 8 + rng() % 300)
              : make_conv2d(1 + rng() % 16, 8 + rng() % 10, 8 + rng() % 10,
                            1 + rng() % 32, 3, 1, 1);
    for (const auto& hw : targets) {
      for (int w1 : bits)
        for (int a1 : bits)
          for (int w2 : bits)
            for (int a2 : bits) {
              if (w1 <= w2 && a1 <= a2) {
                ASSERT_LE(simulate_layer(layer, {w1, a1}, hw),
                          simulate_layer(layer, {w2, a2}, hw));
              }
            }
    }
  }
}

TEST(HwsimTest, Deterministic) {
  const auto net = NetworkIR{"n", {make_linear(64, 32)}, {}, "", 0.0};
  const QuantScheme s{{{4, 2}}};
  EXPECT_EQ(simulate(net, s, HwConfig::cpu_small()),
            simulate(net, s, HwConfig::cpu_small()));
}

TEST(HwsimTest, SpeedupEnvelopeOver64CubedMatmul) {
  const auto layer = make_linear(64, 64, 64);
  for (const auto& hw : {HwConfig::cpu_small(), HwConfig::cpu_high()}) {
    const double scalar = static_cast<double>(simulate_scalar_baseline(layer, hw));
    const double s8 = scalar / simulate_layer(layer, {8, 8}, hw);
    const double s1 = scalar / simulate_layer(layer, {1, 1}, hw);
    EXPECT_GE(s8, 2.0) << hw.id;
    EXPECT_LE(s8, 4.0) << hw.id;
    EXPECT_GE(s1, 8.0) << hw.id;
    EXPECT_LE(s1, 32.0) << hw.id;
  }
}

TEST(HwsimTest, BenchmarkRecordCounts) {
  const auto profile = run_kernel_benchmarks(
      HwConfig::cpu_small(), BenchmarkPlan::default_plan(), BitwidthSet::qat());
  EXPECT_EQ(profile.records.size(), 60u);
  std::set<std::pair<int, int>> combos;
  std::set<std::tuple<int, int, int>> oriented;
  for (const auto& r : profile.records) {
    EXPECT_GT(r.cycles, 0);
    combos.insert({std::max(r.bw, r.ba), std::min(r.bw, r.ba)});
    oriented.insert({static_cast<int>(r.kernel), r.bw, r.ba});
  }
  EXPECT_EQ(combos.size(), 10u);
  // Every ordered pair of the set appears for each kernel kind.
  EXPECT_EQ(oriented.size(), 2u * 16u);
}

TEST(HwsimTest, DoublingMacsDoublesComputeTerm) {
  auto hw = HwConfig::cpu_small();
  const auto a = make_linear(64, 64, 16);
  const auto b = make_linear(64, 64, 32);
  for (auto bits : BitwidthSet::qat().pairs()) {
    const auto lanes = 32 / std::max(bits.w, bits.a);
    const auto ca = (a.macs + lanes - 1) / lanes;
    const auto cb = (b.macs + lanes - 1) / lanes;
    EXPECT_LE(std::abs(cb - 2 * ca), 1);
  }
}

TEST(HwsimTest, EmptyPlanAndBadConfigFail) {
  EXPECT_THROW(run_kernel_benchmarks(HwConfig::cpu_small(), BenchmarkPlan{},
                                     BitwidthSet::qat()),
               ValidationError);
  EXPECT_THROW(hw_config_from_json({{"archetype", "gpu"}}), ValidationError);
  EXPECT_THROW(hw_config_from_json({{"archetype", "simd-cpu"}, {"load_cost", -1.0}}),
               ValidationError);
  const auto layer = make_linear(4, 4);
  EXPECT_THROW(simulate_layer(layer, {9, 8}, HwConfig::cpu_small()), ValidationError);
}

TEST(HwsimTest, JsonRoundTrips) {
  for (const auto& hw : {HwConfig::cpu_tiny(), HwConfig::cpu_high(),
                         HwConfig::systolic_32x16()}) {
    EXPECT_EQ(to_json(hw_config_from_json(to_json(hw))), to_json(hw));
  }
  const auto plan = BenchmarkPlan::default_plan();
  EXPECT_EQ(to_json(plan_from_json(to_json(plan))), to_json(plan));
  const auto profile = run_kernel_benchmarks(HwConfig::systolic_32x16(), plan,
                                             BitwidthSet::qat());
  EXPECT_EQ(to_json(profile_from_json(to_json(profile))), to_json(profile));
}

}  // namespace
}  // namespace mixq
