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
#include <algorithm>
#include <iostream>
#include <random>

#include <gtest/gtest.h>

#include "mixq/error.hpp"
#include "mixq/proxy.hpp"
#include "test_support.hpp"

namespace mixq {
namespace {

NetworkIR chain(std::vector<LayerDesc> layers) {
  NetworkIR net;
  net.name = "t";
  net.layers = std::move(layers);
  for (std::size_t i = 0; i < net.layers.size(); ++i) net.layers[i].index = static_cast<int>(i);
  return net;
}

QuantScheme random_scheme(std::size_t L, std::mt19937_64& rng,
                          const BitwidthSet& set = BitwidthSet::qat()) {
  const auto pairs = set.pairs();
  QuantScheme s;
  for (std::size_t i = 0; i < L; ++i) s.pairs.push_back(pairs[rng() % pairs.size()]);
  return s;
}

TEST(BopsTest, Examples) {
  const auto layer = make_linear(10, 10);
  ASSERT_EQ(layer.macs, 100);
  EXPECT_EQ(layer_bops(layer, {4, 8}), 3200.0);
  const auto net = chain({make_linear(650, 600)});
  ASSERT_EQ(net.layers[0].macs, 390000);
  const auto base = bops(net, {{{8, 8}}});
  EXPECT_EQ(base, 24.96e6);
  EXPECT_DOUBLE_EQ(0.6 * base, 14.976e6);
  EXPECT_THROW(bops(net, {{{8, 8}, {8, 8}}}), ValidationError);
}

TEST(BopsTest, StrictlyMonotoneInEachBitwidth) {
  std::mt19937_64 rng(61);
  const auto net = chain({make_linear(16, 8), make_linear(8, 8), make_linear(8, 4)});
  const std::vector<int> bits = {1, 2, 3, 4, 5, 6, 7, 8};
  for (int t = 0; t < 200; ++t) {
    QuantScheme s;
    for (int i = 0; i < 3; ++i) s.pairs.push_back({bits[rng() % 7], bits[rng() % 7]});
    const auto i = rng() % 3;
    auto up = s;
    (t % 2 ? up.pairs[i].w : up.pairs[i].a) += 1;
    EXPECT_GT(bops(net, up), bops(net, s));
  }
}

TEST(FeaturesTest, Examples) {
  const auto layer = make_linear(10, 10);
  const auto f = layer_features(layer, {4, 8});
  EXPECT_EQ(f.bmacs, 800.0);
  EXPECT_EQ(f.aloads, 800.0);
  EXPECT_EQ(f.wloads, 400.0);
  const auto g = layer_features(layer, {8, 8});
  EXPECT_EQ(g.bmacs, 800.0);
  EXPECT_EQ(g.aloads, 800.0);
  EXPECT_EQ(g.wloads, 800.0);
  const auto h = layer_features(layer, {1, 2});
  EXPECT_EQ(h.bmacs, 200.0);
  EXPECT_EQ(h.aloads, 200.0);
  EXPECT_EQ(h.wloads, 100.0);
}

TEST(FeaturesTest, ExhaustiveOverQatSet) {
  std::mt19937_64 rng(62);
  for (int t = 0; t < 100; ++t) {
    const auto in = 1 + rng() % 400, out = 1 + rng() % 400;
    const auto layer = make_linear(static_cast<int>(in), static_cast<int>(out));
    const double macs = static_cast<double>(in * out);
    for (auto bits : BitwidthSet::qat().pairs()) {
      const auto f = layer_features(layer, bits);
      ASSERT_EQ(f.bmacs, std::max(bits.w, bits.a) * macs);
      ASSERT_EQ(f.aloads, bits.a * macs);
      ASSERT_EQ(f.wloads, bits.w * macs);
    }
  }
}

TEST(OlsTest, NoiselessRecovery) {
  std::mt19937_64 rng(63);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) {
    const double macs = 1000.0 + static_cast<double>(rng() % 100000);
    const auto bits = BitwidthSet::qat().pairs()[rng() % 10];
    const double b = std::max(bits.w, bits.a) * macs, a = bits.a * macs,
                 w = bits.w * macs;
    x.push_back({b, a, w});
    y.push_back(2.0 * b + 1.0 * a + 0.5 * w + 100.0);
  }
  const auto fit = ols(x, y, true);
  ASSERT_EQ(fit.coef.size(), 4u);
  EXPECT_FALSE(fit.ridge_fallback);
  const std::vector<double> truth = {2.0, 1.0, 0.5, 100.0};
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(fit.coef[j], truth[j], 1e-6 * std::abs(truth[j])) << j;
  }
}

// Orthogonality measured on columns scaled to unit norm and residuals
// relative to the target norm.
double max_normalized_dot(const std::vector<std::vector<double>>& x,
                          const std::vector<double>& y,
                          const std::vector<double>& coef) {
  std::vector<double> res(y.size());
  double ynorm = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double p = coef.back();
    for (std::size_t j = 0; j < x[i].size(); ++j) p += coef[j] * x[i][j];
    res[i] = y[i] - p;
    ynorm += y[i] * y[i];
  }
  ynorm = std::sqrt(ynorm);
  double worst = 0.0;
  for (std::size_t j = 0; j <= x.front().size(); ++j) {
    double dot = 0.0, cn = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double c = j < x[i].size() ? x[i][j] : 1.0;
      dot += c * res[i];
      cn += c * c;
    }
    worst = std::max(worst, std::abs(dot) / (std::sqrt(cn) * ynorm));
  }
  return worst;
}

TEST(OlsTest, ResidualsOrthogonalToFeatures) {
  std::mt19937_64 rng(64);
  std::normal_distribution<double> noise(0.0, 500.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 50; ++i) {
      const double macs = 100.0 + static_cast<double>(rng() % 50000);
      const auto bits = BitwidthSet::qat().pairs()[rng() % 10];
      x.push_back({std::max(bits.w, bits.a) * macs, bits.a * macs, bits.w * macs});
      y.push_back(0.3 * x.back()[0] + 0.01 * x.back()[2] + 50.0 + noise(rng) +
                  (x.back()[2] > 1e5 ? 4000.0 : 0.0));
    }
    const auto fit = ols(x, y, true);
    EXPECT_LT(max_normalized_dot(x, y, fit.coef), 1e-8);
  }
}

TEST(OlsTest, RankDeficientFallsBackToRidge) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 1; i <= 10; ++i) {
    x.push_back({double(i), 2.0 * i});
    y.push_back(3.0 * i + 1.0);
  }
  const auto fit = ols(x, y, true);
  EXPECT_TRUE(fit.ridge_fallback);
  for (int i = 1; i <= 10; ++i) {
    EXPECT_NEAR(fit.coef[0] * i + fit.coef[1] * 2 * i + fit.coef[2], 3.0 * i + 1.0,
                1e-3);
  }
}

HardwareProfile linear_profile(double bm, double ba, double bw, double c) {
  auto profile = run_kernel_benchmarks(HwConfig::cpu_small(),
                                       BenchmarkPlan::default_plan(),
                                       BitwidthSet::qat());
  for (auto& r : profile.records) {
    const auto f = layer_features(layer_from_dims(r.kernel, r.dims), {r.bw, r.ba});
    r.cycles = std::llround(bm * f.bmacs + ba * f.aloads + bw * f.wloads + c);
  }
  return profile;
}

TEST(FitTest, NoiselessLinearProfileRecovered) {
  // Integer coefficients keep rounded cycles exactly linear.
  const auto model = fit_proxy(linear_profile(2, 1, 3, 100), ProxyKind::kLinearCbops);
  for (auto k : {KernelKind::kMatMul, KernelKind::kConv2D}) {
    const auto& l = model.linear(k);
    EXPECT_NEAR(l.beta[0], 2.0, 2e-6);
    EXPECT_NEAR(l.beta[1], 1.0, 1e-6);
    EXPECT_NEAR(l.beta[2], 3.0, 3e-6);
    EXPECT_NEAR(l.intercept, 100.0, 1e-4);
  }
  EXPECT_GT(model.report().r2, 1.0 - 1e-12);
}

TEST(FitTest, ConstantProfile) {
  const auto model = fit_proxy(linear_profile(0, 0, 0, 777), ProxyKind::kLinearCbops);
  for (auto k : {KernelKind::kMatMul, KernelKind::kConv2D}) {
    for (double b : model.linear(k).beta) EXPECT_NEAR(b, 0.0, 1e-9);
    EXPECT_NEAR(model.linear(k).intercept, 777.0, 1e-6);
  }
}

TEST(FitTest, TreeBeatsBopsLineOnCpuProfile) {
  const auto profile = run_kernel_benchmarks(
      HwConfig::cpu_small(), BenchmarkPlan::default_plan(), BitwidthSet::qat());
  FitOptions opt;
  opt.seed = 5;
  const auto tree = fit_proxy(profile, ProxyKind::kTreeCbops, opt);
  const auto line = fit_proxy(profile, ProxyKind::kLinearBops, opt);
  EXPECT_GT(tree.report().r2, line.report().r2);
  EXPECT_EQ(tree.report().holdout_count, 12u);
  EXPECT_EQ(tree.report().train_count, 48u);
}

TEST(FitTest, SystolicLinearFitIsTight) {
  const auto profile = run_kernel_benchmarks(
      HwConfig::systolic_32x16(), BenchmarkPlan::default_plan(), BitwidthSet::qat());
  const auto model = fit_proxy(profile, ProxyKind::kLinearCbops);
  EXPECT_GE(model.report().r2, 0.95);
}

TEST(FitTest, TooFewRecords) {
  HardwareProfile p;
  p.hardware_id = "x";
  for (int i = 0; i < 5; ++i) {
    p.records.push_back({KernelKind::kMatMul, 8, 8, {{"m", 4}, {"k", 4}, {"n", 4 + i}}, 10});
  }
  EXPECT_THROW(fit_proxy(p, ProxyKind::kLinearCbops), ValidationError);
  EXPECT_THROW(fit_proxy(HardwareProfile{}, ProxyKind::kLinearCbops), ValidationError);
}

TEST(PredictTest, BopsKindEqualsBops) {
  std::mt19937_64 rng(65);
  const auto net = load_network(testing::data_path("lenet5.json"));
  const auto m = ProxyModel::bops_model();
  for (int t = 0; t < 50; ++t) {
    const auto s = random_scheme(net.layers.size(), rng, BitwidthSet::ptq());
    EXPECT_EQ(predict_latency(m, net, s), bops(net, s));
  }
}

TEST(PredictTest, LinearOneLayerFormulaAndMonotone) {
  const auto model = fit_proxy(linear_profile(2, 1, 3, 100), ProxyKind::kLinearCbops);
  const auto layer = make_linear(20, 30);
  const auto net = chain({layer});
  const auto& l = model.linear(KernelKind::kMatMul);
  const auto f = layer_features(layer, {4, 2});
  EXPECT_DOUBLE_EQ(predict_latency(model, net, {{{4, 2}}}),
                   l.beta[0] * f.bmacs + l.beta[1] * f.aloads +
                       l.beta[2] * f.wloads + l.intercept);

  std::mt19937_64 rng(66);
  const auto big = load_network(testing::data_path("lenet5.json"));
  const std::vector<int> q = {1, 2, 4, 8};
  for (int t = 0; t < 100; ++t) {
    auto s = random_scheme(big.layers.size(), rng);
    const auto i = rng() % s.pairs.size();
    auto lower = s;
    const auto pos = std::find(q.begin(), q.end(), s.pairs[i].w) - q.begin();
    if (pos == 0) continue;
    lower.pairs[i].w = q[pos - 1];
    EXPECT_LE(predict_latency(model, big, lower), predict_latency(model, big, s));
  }
}

TEST(PredictTest, UnfittedModelThrows) {
  ProxyModel m;
  const auto net = chain({make_linear(4, 4)});
  const ProxyModel fresh = ProxyModel::from_json(
      {{"kind", "linear-cbops"}, {"kernels", nlohmann::json::object()}});
  EXPECT_THROW(predict_latency(fresh, net, {{{8, 8}}}), Error);
}

TEST(PredictTest, SaveLoadRoundTrip) {
  testing::TempDir dir("proxy");
  const auto profile = run_kernel_benchmarks(
      HwConfig::cpu_high(), BenchmarkPlan::default_plan(), BitwidthSet::qat());
  const auto net = load_network(testing::data_path("lenet5.json"));
  std::mt19937_64 rng(67);
  for (auto kind : {ProxyKind::kLinearCbops, ProxyKind::kTreeCbops,
                    ProxyKind::kLinearBops}) {
    const auto m = fit_proxy(profile, kind);
    save_proxy(m, dir.path() / "p.json");
    const auto back = load_proxy(dir.path() / "p.json");
    EXPECT_EQ(back.kind(), kind);
    for (int t = 0; t < 10; ++t) {
      const auto s = random_scheme(net.layers.size(), rng);
      EXPECT_EQ(predict_latency(back, net, s), predict_latency(m, net, s));
    }
  }
}

TEST(CorrelationTest, Examples) {
  const std::vector<double> v = {3, 1, 4, 1, 5, 9, 2, 6};
  const auto same = correlate(v, v);
  EXPECT_NEAR(same.r2, 1.0, 1e-12);
  EXPECT_NEAR(same.rank_corr, 1.0, 1e-12);
  const std::vector<double> a = {1, 2}, b = {10, 30};
  EXPECT_NEAR(correlate(a, b).rank_corr, 1.0, 1e-12);
  const std::vector<double> flat = {5, 5, 5};
  const std::vector<double> c = {1, 2, 3};
  EXPECT_THROW(correlate(flat, c), ValidationError);
  EXPECT_THROW(correlate(std::vector<double>{1}, std::vector<double>{1}),
               ValidationError);
}

TEST(CorrelationTest, CbopsGapOver64RandomSchemes) {
  // The small CPU has a data cache inside the benchmark size range, so the
  // CBOPs features go through the tree model there.
  const auto hw = HwConfig::cpu_small();
  const auto profile =
      run_kernel_benchmarks(hw, BenchmarkPlan::default_plan(), BitwidthSet::qat());
  const auto net = load_network(testing::data_path("lenet5.json"));
  const auto tree = fit_proxy(profile, ProxyKind::kTreeCbops);
  const auto line = fit_proxy(profile, ProxyKind::kLinearBops);
  double gap = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    std::mt19937_64 rng(draw);
    std::vector<QuantScheme> schemes;
    for (int i = 0; i < 64; ++i) schemes.push_back(random_scheme(net.layers.size(), rng));
    gap += correlation_report(tree, net, schemes, hw).r2 -
           correlation_report(line, net, schemes, hw).r2;
  }
  EXPECT_GE(gap / 10.0, 0.1);
}

}  // namespace
}  // namespace mixq
