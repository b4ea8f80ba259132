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
#include "mixq/explorer.hpp"
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

struct Bench {
  NetworkIR net;
  CostTable cost;
  SyntheticOracle oracle;
  Evaluator eval;

  explicit Bench(std::vector<int> widths, std::uint64_t oracle_seed = 0)
      : net(mlp(std::move(widths))),
        cost(CostTable::bops(net, BitwidthSet::qat())),
        oracle(SyntheticOracle::make(net.layers.size(), oracle_seed)) {
    eval = [this](const QuantScheme& s) { return oracle.accuracy(s); };
  }
};

SearchConfig config(double ratio, std::uint64_t seed, int budget = 48) {
  SearchConfig cfg;
  cfg.ratio = ratio;
  cfg.seed = seed;
  cfg.budget = budget;
  cfg.forest.n_trees = 30;
  return cfg;
}

TEST(ExploreTest, ContractsHold) {
  Bench su({64, 128, 128, 64, 32, 10});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto cfg = config(0.5, seed, 30);
    const auto r = explore(su.cost, cfg, su.eval);
    const auto& st = r.state;
    EXPECT_LE(st.samples.size(), 30u);
    std::set<QuantScheme> seen;
    for (const auto& s : st.samples) EXPECT_TRUE(seen.insert(s.scheme).second);
    for (const auto& s : st.samples) {
      if (!s.initial) EXPECT_TRUE(s.feasible);
      EXPECT_EQ(s.feasible, s.cost <= st.constraint);
    }
    EXPECT_LE(r.cost, st.constraint);
    EXPECT_LE(su.cost.total(r.best), st.constraint);
    ASSERT_EQ(st.trace.size(), st.samples.size());
    EXPECT_TRUE(std::is_sorted(st.trace.begin(), st.trace.end()));
    EXPECT_EQ(st.trace.back(), r.accuracy);
    EXPECT_EQ(r.accuracy, su.oracle.accuracy(r.best));
  }
}

TEST(ExploreTest, SeedDeterministic) {
  Bench su({32, 64, 64, 32, 10});
  const auto cfg = config(0.6, 3, 24);
  const auto a = explore(su.cost, cfg, su.eval);
  const auto b = explore(su.cost, cfg, su.eval);
  EXPECT_EQ(to_json(a, cfg), to_json(b, cfg));
}

TEST(ExploreTest, BeatsRandomSearchOnFourLayers) {
  Bench su({64, 128, 128, 64, 10});
  double ours = 0.0, rand = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cfg = config(0.6, seed);
    ours += explore(su.cost, cfg, su.eval).accuracy;
    rand += random_search(su.cost, cfg, su.eval).accuracy;
  }
  EXPECT_GE(ours, rand);
}

TEST(ExploreTest, BudgetEqualToInitialSamples) {
  // 14 layers give 16 distinct initial samples.
  Bench su({16, 24, 32, 24, 16, 24, 32, 24, 16, 24, 32, 24, 16, 24, 10});
  auto cfg = config(0.6, 1, 16);
  const auto r = explore(su.cost, cfg, su.eval);
  EXPECT_EQ(r.state.iteration, 0);
  double best = -1.0;
  for (const auto& s : r.state.samples) {
    EXPECT_TRUE(s.initial);
    if (s.feasible) best = std::max(best, s.accuracy);
  }
  EXPECT_EQ(r.accuracy, best);
  cfg.budget = 15;
  EXPECT_THROW(explore(su.cost, cfg, su.eval), ValidationError);
}

TEST(ExploreTest, RatioOneAdmitsUniformMax) {
  Bench su({32, 64, 64, 32, 10});
  const auto r = explore(su.cost, config(1.0, 2, 20), su.eval);
  EXPECT_GE(r.accuracy, su.oracle.accuracy(scheme_uniform(su.net, 8, BitwidthSet::qat())));
}

TEST(ExploreTest, ValidationAndInfeasibility) {
  Bench su({32, 64, 64, 32, 10});
  EXPECT_THROW(explore(su.cost, config(0.0, 0), su.eval), ValidationError);
  EXPECT_THROW(explore(su.cost, config(1.5, 0), su.eval), ValidationError);
  auto cfg = config(0.5, 0);
  cfg.absolute = 1.0;
  EXPECT_THROW(explore(su.cost, cfg, su.eval), InfeasibleConstraint);
  cfg.absolute.reset();
  cfg.sampler.bitwidths = BitwidthSet::ptq();
  EXPECT_THROW(explore(su.cost, cfg, su.eval), ValidationError);
}

TEST(ExploreTest, EvaluatorFailureKeepsPartialState) {
  Bench su({32, 64, 64, 32, 10});
  int calls = 0;
  const Evaluator flaky = [&](const QuantScheme& s) {
    if (++calls == 20) throw std::runtime_error("device lost");
    return su.oracle.accuracy(s);
  };
  try {
    explore(su.cost, config(0.6, 0), flaky);
    FAIL() << "expected SearchAborted";
  } catch (const SearchAborted& e) {
    EXPECT_EQ(e.partial().samples.size(), 19u);
    EXPECT_NE(std::string(e.what()).find("device lost"), std::string::npos);
  }
}

TEST(ExploreTest, ExhaustiveBestIsOptimal) {
  Bench su({16, 32, 16});
  const double C = 0.4 * su.cost.total(scheme_uniform(su.net, 8, BitwidthSet::qat()));
  const auto best = exhaustive_best(su.cost, C, su.eval);
  EXPECT_LE(best.cost, C);
  const auto pairs = BitwidthSet::qat().pairs();
  for (auto a : pairs) {
    for (auto b : pairs) {
      const QuantScheme s{{a, b}};
      if (su.cost.total(s) <= C) EXPECT_LE(su.oracle.accuracy(s), best.accuracy);
    }
  }
  Bench big({8, 8, 8, 8, 8, 8, 8, 8, 8});
  EXPECT_THROW(exhaustive_best(big.cost, 1e9, big.eval), ValidationError);
}

TEST(AblationTest, VariantsAndSharedSeeds) {
  Bench su({32, 64, 64, 32, 16, 10});
  const auto cfg = config(0.6, 5, 24);
  EXPECT_THROW(ablation_run(su.cost, cfg, su.eval, {}, 2), ValidationError);
  const auto rows = ablation_run(
      su.cost, cfg, su.eval,
      {AblationVariant::kRfOnly, AblationVariant::kOrthogonal, AblationVariant::kFull}, 2);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.best.size(), 2u);
  // Variants with orthogonal init start from identical samples.
  auto a = cfg, b = cfg;
  a.near_constraint = false;
  const auto ra = explore(su.cost, a, su.eval), rb = explore(su.cost, b, su.eval);
  for (std::size_t i = 0; i < ra.state.samples.size(); ++i) {
    if (!ra.state.samples[i].initial) break;
    EXPECT_EQ(ra.state.samples[i].scheme, rb.state.samples[i].scheme);
  }
}

TEST(ResultJsonTest, RoundTrip) {
  Bench su({32, 64, 64, 32, 10});
  const auto cfg = config(0.6, 0, 20);
  const auto r = explore(su.cost, cfg, su.eval);
  const auto back = result_from_json(to_json(r, cfg));
  EXPECT_EQ(back.best, r.best);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.state.trace, r.state.trace);
  EXPECT_EQ(back.state.samples.size(), r.state.samples.size());
  EXPECT_THROW(result_from_json({{"best", 3}}), FormatError);
  EXPECT_THROW(scheme_from_json({{8}}), FormatError);
}

}  // namespace
}  // namespace mixq
