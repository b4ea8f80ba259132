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


#ifndef MIXQ_SAMPLER_HPP_
#define MIXQ_SAMPLER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/model_ir.hpp"
#include "mixq/proxy.hpp"
#include "mixq/surrogate.hpp"

namespace mixq {

// Per-layer cost of every allowed (w, a) pair. All cost models used by the
// search are separable over layers, so a scheme's cost is a table lookup
// sum (clamped at zero, as predict_latency).
class CostTable {
 public:
  using LayerCostFn = std::function<double(std::size_t layer, LayerBits bits)>;

  CostTable() = default;
  CostTable(std::size_t num_layers, const BitwidthSet& set,
            const LayerCostFn& layer_cost);

  static CostTable bops(const NetworkIR& net, const BitwidthSet& set);
  static CostTable proxy(const ProxyModel& model, const NetworkIR& net,
                         const BitwidthSet& set);

  std::size_t num_layers() const { return num_layers_; }
  const BitwidthSet& bitwidths() const { return set_; }
  double layer(std::size_t i, LayerBits bits) const;
  double total(const QuantScheme& scheme) const;

 private:
  std::size_t pair_index(LayerBits bits) const;

  std::size_t num_layers_ = 0;
  BitwidthSet set_;
  std::vector<double> table_;  // [layer][pair]
};

struct GaConfig {
  int population = 64;
  int generations = 20;
  double mutation_rate = 0.0;  // per gene; 0 selects 1/L
  int tournament = 3;
};

struct SamplerConfig {
  int n_init = 16;
  BitwidthSet bitwidths = BitwidthSet::qat();
  bool protect_ends = true;
  double band_start_frac = 0.8;
  double band_end_frac = 0.5;
  GaConfig ga;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SamplerConfig& cfg);

// Layer-wise orthogonal initial sampling: the two uniform extremes, then
// n_init - 2 samples that each modify a disjoint block of a seeded layer
// permutation, leaving the rest at (b_max, b_max).
std::vector<QuantScheme> initial_samples(std::size_t num_layers,
                                         const SamplerConfig& cfg);

// n_init uniformly random schemes (ablation baseline).
std::vector<QuantScheme> random_samples(std::size_t num_layers,
                                        const SamplerConfig& cfg);

struct Band {
  double low = 0.0;
  double high = 0.0;
};

// Linear schedule from [start*C, C] at t = 0 to [end*C, C] at t = T.
Band band(int t, int total, double constraint, const SamplerConfig& cfg);

// True when first/last layer pinning is in effect: L >= 3 and the pinned
// cheapest scheme still fits under `constraint`.
bool ends_pinned(const CostTable& cost, double constraint,
                 const SamplerConfig& cfg);

// Cheapest scheme reachable under the sampler rules (all b_min, ends at
// b_max when pinned).
QuantScheme cheapest_scheme(const CostTable& cost, double constraint,
                            const SamplerConfig& cfg);

// GA over schemes with fitness = surrogate-predicted accuracy. Returns the
// best unevaluated candidate seen whose cost lies in the band; when none
// exists, a random feasible (cost <= band.high) unevaluated scheme; nullopt
// when even that search fails. Throws InfeasibleConstraint when the
// cheapest scheme exceeds band.high. `stream` selects the RNG stream.
std::optional<QuantScheme> propose(const Forest& forest, const CostTable& cost,
                                   Band band, const SamplerConfig& cfg,
                                   const std::set<QuantScheme>& evaluated,
                                   std::uint64_t stream);

}  // namespace mixq

#endif  // MIXQ_SAMPLER_HPP_
