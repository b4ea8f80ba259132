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


#include "mixq/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mixq/error.hpp"
#include "mixq/random.hpp"

namespace mixq {
namespace {

constexpr std::uint64_t kInitStream = 0x1a17;
constexpr int kResampleAttempts = 8;
constexpr int kFallbackAttempts = 2000;

using Genome = std::vector<int>;  // pair index per layer

class Genes {
 public:
  Genes(const CostTable& cost, const SamplerConfig& cfg, bool pinned)
      : cost_(cost), pairs_(cfg.bitwidths.pairs()), bits_(cfg.bitwidths.bits) {
    const auto L = cost.num_layers();
    free_.assign(L, true);
    top_ = index_of({cfg.bitwidths.max(), cfg.bitwidths.max()});
    if (pinned) free_.front() = free_.back() = false;
  }

  std::size_t size() const { return free_.size(); }
  bool is_free(std::size_t i) const { return free_[i]; }
  int top() const { return top_; }
  std::size_t num_pairs() const { return pairs_.size(); }

  QuantScheme scheme(const Genome& g) const {
    QuantScheme s;
    s.pairs.reserve(g.size());
    for (int p : g) s.pairs.push_back(pairs_[p]);
    return s;
  }

  double total(const Genome& g) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) sum += cost_.layer(i, pairs_[g[i]]);
    return std::max(0.0, sum);
  }

  Genome random(Rng& rng) const {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(pairs_.size()) - 1);
    Genome g(size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = free_[i] ? pick(rng) : top_;
    return g;
  }

  Genome cheapest() const {
    Genome g(size(), index_of({bits_.front(), bits_.front()}));
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!free_[i]) g[i] = top_;
    }
    return g;
  }

  enum class Fit { kInBand, kBelowBand, kOver };

  // Greedy single-layer walk into [low, high]; resamples on failure.
  Fit repair(Genome& g, Band band, Rng& rng) const {
    const auto L = size();
    Fit result = Fit::kOver;
    Genome best_feasible;
    for (int attempt = 0; attempt < kResampleAttempts; ++attempt) {
      double c = total(g);
      std::size_t steps = 0;
      while (c > band.high && steps < 4 * L) {
        int pick = -1;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < L; ++i) {
          if (!free_[i] || lower(g[i]) < 0) continue;
          const double lc = cost_.layer(i, pairs_[g[i]]);
          if (lc > worst) {
            worst = lc;
            pick = static_cast<int>(i);
          }
        }
        if (pick < 0) break;
        g[pick] = lower(g[pick]);
        c = total(g);
        ++steps;
      }
      while (c <= band.high && c < band.low && steps < 4 * L) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < L; ++i) {
          if (free_[i] && raise(g[i]) >= 0) order.push_back(i);
        }
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
          return cost_.layer(a, pairs_[g[a]]) < cost_.layer(b, pairs_[g[b]]);
        });
        bool moved = false;
        for (auto i : order) {
          const int old = g[i];
          g[i] = raise(old);
          const double nc = total(g);
          if (nc <= band.high) {
            c = nc;
            moved = true;
            break;
          }
          g[i] = old;
        }
        if (!moved) break;
        ++steps;
      }
      if (c <= band.high && c >= band.low) return Fit::kInBand;
      if (c <= band.high && result == Fit::kOver) {
        result = Fit::kBelowBand;
        best_feasible = g;
      }
      g = random(rng);
    }
    if (result == Fit::kBelowBand) g = best_feasible;
    return result;
  }

 private:
  int index_of(LayerBits b) const {
    const auto it = std::find(pairs_.begin(), pairs_.end(), b);
    return static_cast<int>(it - pairs_.begin());
  }
  int step(int b, int dir) const {
    const auto it = std::find(bits_.begin(), bits_.end(), b);
    const auto pos = (it - bits_.begin()) + dir;
    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(bits_.size())) return -1;
    return bits_[pos];
  }
  // Next cheaper pair: the larger bit steps down (weights on ties).
  int lower(int p) const {
    auto b = pairs_[p];
    int& target = b.w >= b.a ? b.w : b.a;
    const int next = step(target, -1);
    if (next < 0) return -1;
    target = next;
    return index_of(b);
  }
  // Next dearer pair: the smaller bit steps up (activations on ties).
  int raise(int p) const {
    auto b = pairs_[p];
    int& target = b.a <= b.w ? b.a : b.w;
    const int next = step(target, +1);
    if (next < 0) return -1;
    target = next;
    return index_of(b);
  }

  const CostTable& cost_;
  std::vector<LayerBits> pairs_;
  std::vector<int> bits_;
  std::vector<bool> free_;
  int top_ = 0;
};

struct Candidate {
  double predicted = 0.0;
  double cost = 0.0;
  QuantScheme scheme;
};

// Higher prediction, then lower cost, then lexicographic scheme order.
bool better(const Candidate& a, const Candidate& b) {
  if (a.predicted != b.predicted) return a.predicted > b.predicted;
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.scheme < b.scheme;
}

}  // namespace

CostTable::CostTable(std::size_t num_layers, const BitwidthSet& set,
                     const LayerCostFn& layer_cost)
    : num_layers_(num_layers), set_(set) {
  const auto pairs = set.pairs();
  table_.resize(num_layers * pairs.size());
  for (std::size_t i = 0; i < num_layers; ++i) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      table_[i * pairs.size() + p] = layer_cost(i, pairs[p]);
    }
  }
}

CostTable CostTable::bops(const NetworkIR& net, const BitwidthSet& set) {
  return CostTable(net.layers.size(), set, [&](std::size_t i, LayerBits b) {
    return layer_bops(net.layers[i], b);
  });
}

CostTable CostTable::proxy(const ProxyModel& model, const NetworkIR& net,
                           const BitwidthSet& set) {
  return CostTable(net.layers.size(), set, [&](std::size_t i, LayerBits b) {
    return model.predict_layer(net.layers[i], b);
  });
}

std::size_t CostTable::pair_index(LayerBits bits) const {
  const auto& v = set_.bits;
  const auto wi = std::find(v.begin(), v.end(), bits.w) - v.begin();
  const auto ai = std::find(v.begin(), v.end(), bits.a) - v.begin();
  if (wi == static_cast<std::ptrdiff_t>(v.size()) ||
      ai == static_cast<std::ptrdiff_t>(v.size())) {
    throw ValidationError("bitwidth pair W" + std::to_string(bits.w) + "A" +
                          std::to_string(bits.a) + " not in the cost table");
  }
  return static_cast<std::size_t>(wi) * v.size() + static_cast<std::size_t>(ai);
}

double CostTable::layer(std::size_t i, LayerBits bits) const {
  if (i >= num_layers_) throw ValidationError("layer index out of range");
  return table_[i * set_.bits.size() * set_.bits.size() + pair_index(bits)];
}

double CostTable::total(const QuantScheme& scheme) const {
  if (scheme.size() != num_layers_) {
    throw ValidationError("scheme has " + std::to_string(scheme.size()) +
                          " layers, cost table " + std::to_string(num_layers_));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < num_layers_; ++i) sum += layer(i, scheme.pairs[i]);
  return std::max(0.0, sum);
}

void SamplerConfig::validate() const {
  if (n_init < 3) throw ValidationError("n_init must be >= 3");
  if (bitwidths.bits.empty()) throw ValidationError("empty bitwidth set");
  if (!(band_end_frac > 0.0 && band_end_frac <= band_start_frac &&
        band_start_frac <= 1.0)) {
    throw ValidationError("band fractions need 0 < end <= start <= 1");
  }
  if (ga.population < 2) throw ValidationError("GA population must be >= 2");
  if (ga.generations < 1) throw ValidationError("GA generations must be >= 1");
  if (ga.tournament < 1) throw ValidationError("GA tournament must be >= 1");
  if (!(ga.mutation_rate >= 0.0 && ga.mutation_rate <= 1.0)) {
    throw ValidationError("GA mutation rate must lie in [0, 1]");
  }
}

nlohmann::json to_json(const SamplerConfig& cfg) {
  return {{"n_init", cfg.n_init},
          {"bitwidths", cfg.bitwidths.bits},
          {"protect_ends", cfg.protect_ends},
          {"band_start_frac", cfg.band_start_frac},
          {"band_end_frac", cfg.band_end_frac},
          {"ga",
           {{"population", cfg.ga.population},
            {"generations", cfg.ga.generations},
            {"mutation_rate", cfg.ga.mutation_rate},
            {"tournament", cfg.ga.tournament}}},
          {"seed", cfg.seed}};
}

std::vector<QuantScheme> initial_samples(std::size_t num_layers,
                                         const SamplerConfig& cfg) {
  cfg.validate();
  if (num_layers == 0) throw ValidationError("network has no layers");
  const int hi = cfg.bitwidths.max(), lo = cfg.bitwidths.min();
  const QuantScheme top{std::vector<LayerBits>(num_layers, {hi, hi})};
  std::vector<QuantScheme> out = {top, {std::vector<LayerBits>(num_layers, {lo, lo})}};

  Rng rng(derive_seed(cfg.seed, kInitStream));
  std::vector<std::size_t> perm(num_layers);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<LayerBits> others;
  for (auto p : cfg.bitwidths.pairs()) {
    if (!(p == LayerBits{hi, hi})) others.push_back(p);
  }
  const auto blocks = static_cast<std::size_t>(cfg.n_init - 2);
  const std::size_t nm = std::max<std::size_t>((num_layers + blocks - 1) / blocks, 1);
  for (std::size_t s = 0; s < blocks; ++s) {
    auto scheme = top;
    const auto begin = std::min(s * nm, num_layers);
    const auto end = std::min(begin + nm, num_layers);
    for (auto j = begin; j < end && !others.empty(); ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      scheme.pairs[perm[j]] = others[pick(rng)];
    }
    out.push_back(std::move(scheme));
  }
  return out;
}

std::vector<QuantScheme> random_samples(std::size_t num_layers,
                                        const SamplerConfig& cfg) {
  cfg.validate();
  if (num_layers == 0) throw ValidationError("network has no layers");
  Rng rng(derive_seed(cfg.seed, kInitStream));
  const auto pairs = cfg.bitwidths.pairs();
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  std::vector<QuantScheme> out(static_cast<std::size_t>(cfg.n_init));
  for (auto& s : out) {
    for (std::size_t i = 0; i < num_layers; ++i) s.pairs.push_back(pairs[pick(rng)]);
  }
  return out;
}

Band band(int t, int total, double constraint, const SamplerConfig& cfg) {
  if (t < 0 || (total > 0 && t > total) || (total <= 0 && t > 0)) {
    throw ValidationError("band iteration out of range");
  }
  const double frac = total > 0 ? static_cast<double>(t) / total : 0.0;
  const double lo =
      cfg.band_start_frac - (cfg.band_start_frac - cfg.band_end_frac) * frac;
  return {lo * constraint, constraint};
}

bool ends_pinned(const CostTable& cost, double constraint,
                 const SamplerConfig& cfg) {
  if (!cfg.protect_ends || cost.num_layers() < 3) return false;
  const Genes pinned(cost, cfg, true);
  return pinned.total(pinned.cheapest()) <= constraint;
}

QuantScheme cheapest_scheme(const CostTable& cost, double constraint,
                            const SamplerConfig& cfg) {
  const Genes genes(cost, cfg, ends_pinned(cost, constraint, cfg));
  return genes.scheme(genes.cheapest());
}

std::optional<QuantScheme> propose(const Forest& forest, const CostTable& cost,
                                   Band band, const SamplerConfig& cfg,
                                   const std::set<QuantScheme>& evaluated,
                                   std::uint64_t stream) {
  cfg.validate();
  if (!forest.fitted()) throw Error("surrogate forest is not fitted");
  const auto L = cost.num_layers();
  if (L == 0) throw ValidationError("network has no layers");
  const Genes genes(cost, cfg, ends_pinned(cost, band.high, cfg));
  if (genes.total(genes.cheapest()) > band.high) {
    throw InfeasibleConstraint("even the cheapest scheme costs " +
                               std::to_string(genes.total(genes.cheapest())) +
                               " > constraint " + std::to_string(band.high));
  }

  Rng rng(derive_seed(cfg.seed, stream));
  const double mutation =
      cfg.ga.mutation_rate > 0.0 ? cfg.ga.mutation_rate : 1.0 / static_cast<double>(L);

  std::map<Genome, double> predicted;
  auto predict_genome = [&](const Genome& g) {
    auto it = predicted.find(g);
    if (it == predicted.end()) {
      it = predicted.emplace(g, predict(forest, genes.scheme(g))).first;
    }
    return it->second;
  };

  std::optional<Candidate> best;
  struct Member {
    Genome genome;
    bool in_band = false;
    double fitness = 0.0;
  };
  auto admit = [&](Genome g) {
    Member m;
    m.in_band = genes.repair(g, band, rng) == Genes::Fit::kInBand;
    m.fitness = predict_genome(g);
    m.genome = std::move(g);
    if (m.in_band) {
      Candidate c{m.fitness, genes.total(m.genome), genes.scheme(m.genome)};
      if (!evaluated.contains(c.scheme) && (!best || better(c, *best))) best = c;
    }
    return m;
  };

  const auto pop_size = static_cast<std::size_t>(cfg.ga.population);
  std::vector<Member> population;
  population.reserve(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) population.push_back(admit(genes.random(rng)));

  std::uniform_int_distribution<std::size_t> pick_member(0, pop_size - 1);
  std::uniform_int_distribution<int> pick_pair(0, static_cast<int>(genes.num_pairs()) - 1);
  std::bernoulli_distribution coin(0.5), mutate(mutation);
  auto tournament = [&]() -> const Member& {
    const Member* winner = &population[pick_member(rng)];
    for (int k = 1; k < cfg.ga.tournament; ++k) {
      const Member& m = population[pick_member(rng)];
      if (std::tie(m.in_band, m.fitness) > std::tie(winner->in_band, winner->fitness)) {
        winner = &m;
      }
    }
    return *winner;
  };

  for (int gen = 0; gen < cfg.ga.generations; ++gen) {
    std::vector<Member> next;
    next.reserve(pop_size);
    while (next.size() < pop_size) {
      const Genome& a = tournament().genome;
      const Genome& b = tournament().genome;
      Genome child(L);
      for (std::size_t i = 0; i < L; ++i) {
        child[i] = coin(rng) ? a[i] : b[i];
        if (genes.is_free(i) && mutate(rng)) child[i] = pick_pair(rng);
      }
      next.push_back(admit(std::move(child)));
    }
    population = std::move(next);
  }
  if (best) return best->scheme;

  // No unevaluated in-band candidate: fall back to any feasible scheme.
  const Band below{-std::numeric_limits<double>::infinity(), band.high};
  for (int attempt = 0; attempt < kFallbackAttempts; ++attempt) {
    Genome g = genes.random(rng);
    if (genes.repair(g, below, rng) != Genes::Fit::kInBand) continue;
    auto s = genes.scheme(g);
    if (!evaluated.contains(s)) return s;
  }
  return std::nullopt;
}

}  // namespace mixq
