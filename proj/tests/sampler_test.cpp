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

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mixq/error.hpp"
#include "mixq/sampler.hpp"
#include "test_support.hpp"

namespace mixq {
namespace {

NetworkIR mlp(std::vector<int> widths) {
  NetworkIR net;
  net.name = "mlp";
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    net.layers.push_back(make_linear(widths[i], widths[i + 1]));
    net.layers.back().index = static_cast<int>(i);
  }
  return net;
}

// Layers that differ from the all-b_max scheme.
std::set<std::size_t> modified(const QuantScheme& s, int hi) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s.pairs[i] == LayerBits{hi, hi})) out.insert(i);
  }
  return out;
}

TEST(InitialSamplesTest, OrthogonalBlocksOverRandomDraws) {
  std::mt19937_64 rng(71);
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t L = 1 + rng() % 64;
    SamplerConfig cfg;
    cfg.n_init = 3 + static_cast<int>(rng() % 30);
    cfg.seed = rng();
    cfg.bitwidths = draw % 2 ? BitwidthSet::qat() : BitwidthSet::ptq();
    const int hi = cfg.bitwidths.max(), lo = cfg.bitwidths.min();
    const auto samples = initial_samples(L, cfg);
    ASSERT_EQ(samples.size(), static_cast<std::size_t>(cfg.n_init));
    EXPECT_EQ(samples[0], QuantScheme{std::vector<LayerBits>(L, {hi, hi})});
    EXPECT_EQ(samples[1], QuantScheme{std::vector<LayerBits>(L, {lo, lo})});

    const std::size_t blocks = cfg.n_init - 2;
    const std::size_t nm = std::max<std::size_t>((L + blocks - 1) / blocks, 1);
    std::set<std::size_t> seen;
    for (std::size_t s = 0; s < blocks; ++s) {
      validate_scheme(samples[s + 2], L, cfg.bitwidths);
      const auto m = modified(samples[s + 2], hi);
      const std::size_t begin = std::min(s * nm, L), end = std::min(begin + nm, L);
      ASSERT_EQ(m.size(), end - begin) << "L=" << L << " n_init=" << cfg.n_init;
      for (auto i : m) ASSERT_TRUE(seen.insert(i).second) << "blocks overlap";
    }
    if (blocks * nm >= L) EXPECT_EQ(seen.size(), L);
  }
}

TEST(InitialSamplesTest, Examples) {
  SamplerConfig cfg;
  cfg.n_init = 4;
  const auto s = initial_samples(4, cfg);
  EXPECT_EQ(modified(s[2], 8).size(), 2u);
  EXPECT_EQ(modified(s[3], 8).size(), 2u);

  cfg.n_init = 10;
  const auto t = initial_samples(2, cfg);
  for (std::size_t i = 4; i < t.size(); ++i) EXPECT_EQ(t[i], t[0]);
  EXPECT_EQ(modified(t[2], 8).size() + modified(t[3], 8).size(), 2u);

  cfg.n_init = 2;
  EXPECT_THROW(initial_samples(4, cfg), ValidationError);
}

TEST(InitialSamplesTest, SeedDeterminism) {
  SamplerConfig cfg;
  cfg.seed = 9;
  EXPECT_EQ(initial_samples(12, cfg), initial_samples(12, cfg));
  auto other = cfg;
  other.seed = 10;
  EXPECT_NE(initial_samples(12, cfg), initial_samples(12, other));
}

TEST(BandTest, Schedule) {
  SamplerConfig cfg;
  const auto b0 = band(0, 10, 1000.0, cfg);
  EXPECT_DOUBLE_EQ(b0.low, 800.0);
  EXPECT_DOUBLE_EQ(b0.high, 1000.0);
  EXPECT_DOUBLE_EQ(band(10, 10, 1000.0, cfg).low, 500.0);
  EXPECT_DOUBLE_EQ(band(5, 10, 1000.0, cfg).low, 650.0);
  EXPECT_DOUBLE_EQ(band(0, 0, 1000.0, cfg).low, 800.0);
  EXPECT_THROW(band(1, 0, 1000.0, cfg), ValidationError);
}

Forest forest_on(const std::vector<QuantScheme>& schemes,
                 double (*f)(const QuantScheme&)) {
  std::vector<AccuracySample> samples;
  for (const auto& s : schemes) samples.push_back({s, f(s)});
  ForestConfig fc;
  fc.n_trees = 20;
  fc.seed = 3;
  return fit_surrogate(samples, fc);
}

double total_bits(const QuantScheme& s) {
  double t = 0.0;
  for (auto p : s.pairs) t += p.w + p.a;
  return t;
}

TEST(ProposeTest, ProposalsStayInBandAndUnevaluated) {
  const auto net = mlp({32, 64, 64, 48, 32, 10});
  SamplerConfig cfg;
  cfg.seed = 4;
  const auto cost = CostTable::bops(net, cfg.bitwidths);
  const double C = 0.4 * cost.total(scheme_uniform(net, 8, cfg.bitwidths));
  auto initial = initial_samples(net.layers.size(), cfg);
  const auto forest = forest_on(initial, total_bits);
  std::set<QuantScheme> evaluated(initial.begin(), initial.end());
  for (int t = 0; t < 20; ++t) {
    const auto b = band(t, 19, C, cfg);
    const auto s = propose(forest, cost, b, cfg, evaluated, 100 + t);
    ASSERT_TRUE(s.has_value());
    EXPECT_LE(cost.total(*s), b.high);
    EXPECT_GE(cost.total(*s), b.low);
    EXPECT_EQ(s->pairs.front(), (LayerBits{8, 8}));
    EXPECT_EQ(s->pairs.back(), (LayerBits{8, 8}));
    EXPECT_FALSE(evaluated.contains(*s));
    evaluated.insert(*s);
  }
}

TEST(ProposeTest, MatchesExhaustiveArgmaxOnSmallSpace) {
  const auto net = mlp({16, 32, 8, 24});
  SamplerConfig cfg;
  cfg.bitwidths = BitwidthSet::from({1, 8});
  cfg.protect_ends = false;
  const auto cost = CostTable::bops(net, cfg.bitwidths);
  const auto pairs = cfg.bitwidths.pairs();
  std::vector<QuantScheme> all;
  for (auto a : pairs)
    for (auto b : pairs)
      for (auto c : pairs) all.push_back({{a, b, c}});
  ASSERT_EQ(all.size(), 64u);
  const auto forest = forest_on(all, total_bits);

  int checked = 0;
  for (double ratio : {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
    const double C = ratio * cost.total(all.back());
    const Band b{0.8 * C, C};
    std::set<QuantScheme> evaluated = {all[0]};
    std::optional<QuantScheme> want;
    double want_pred = 0, want_cost = 0;
    for (const auto& s : all) {
      const double c = cost.total(s);
      if (c < b.low || c > b.high || evaluated.contains(s)) continue;
      const double p = predict(forest, s);
      if (!want || p > want_pred || (p == want_pred && c < want_cost) ||
          (p == want_pred && c == want_cost && s < *want)) {
        want = s;
        want_pred = p;
        want_cost = c;
      }
    }
    if (!want) continue;
    ++checked;
    const auto got = propose(forest, cost, b, cfg, evaluated, 7);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, *want) << "ratio " << ratio;
  }
  EXPECT_GE(checked, 4);
}

TEST(ProposeTest, InfeasibleConstraint) {
  const auto net = mlp({16, 16, 16});
  SamplerConfig cfg;
  const auto cost = CostTable::bops(net, cfg.bitwidths);
  const auto forest = forest_on(initial_samples(2, cfg), total_bits);
  const double floor = cost.total(scheme_uniform(net, 1, cfg.bitwidths));
  EXPECT_THROW(propose(forest, cost, {0.0, 0.5 * floor}, cfg, {}, 1),
               InfeasibleConstraint);
}

TEST(ProposeTest, PinningDroppedWhenItWouldBeInfeasible) {
  const auto net = mlp({4, 64, 64, 4});
  SamplerConfig cfg;
  const auto cost = CostTable::bops(net, cfg.bitwidths);
  const double base = cost.total(scheme_uniform(net, 8, cfg.bitwidths));
  EXPECT_TRUE(ends_pinned(cost, 0.9 * base, cfg));
  EXPECT_FALSE(ends_pinned(cost, 0.1 * base, cfg));
  EXPECT_EQ(cheapest_scheme(cost, 0.1 * base, cfg),
            scheme_uniform(net, 1, cfg.bitwidths));
  const auto two = mlp({8, 8, 8});
  EXPECT_FALSE(ends_pinned(CostTable::bops(two, cfg.bitwidths), 1e9, cfg));
}

TEST(ProposeTest, DeterministicPerStream) {
  const auto net = mlp({32, 32, 32, 32, 32});
  SamplerConfig cfg;
  const auto cost = CostTable::bops(net, cfg.bitwidths);
  const auto initial = initial_samples(4, cfg);
  const auto forest = forest_on(initial, total_bits);
  const double C = 0.5 * cost.total(initial[0]);
  const std::set<QuantScheme> ev(initial.begin(), initial.end());
  EXPECT_EQ(propose(forest, cost, band(0, 10, C, cfg), cfg, ev, 5),
            propose(forest, cost, band(0, 10, C, cfg), cfg, ev, 5));
}

TEST(CostTableTest, MatchesDirectCosts) {
  const auto net = load_network(testing::data_path("lenet5.json"));
  const auto set = BitwidthSet::qat();
  const auto table = CostTable::bops(net, set);
  std::mt19937_64 rng(72);
  const auto pairs = set.pairs();
  for (int t = 0; t < 50; ++t) {
    QuantScheme s;
    for (std::size_t i = 0; i < net.layers.size(); ++i) s.pairs.push_back(pairs[rng() % 16]);
    EXPECT_EQ(table.total(s), bops(net, s));
  }
  EXPECT_THROW(table.total({{{8, 8}}}), ValidationError);
  EXPECT_THROW(table.layer(0, {3, 8}), ValidationError);
}

}  // namespace
}  // namespace mixq
