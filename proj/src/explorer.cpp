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


#include "mixq/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mixq/random.hpp"

namespace mixq {
namespace {

using json = nlohmann::json;

constexpr std::uint64_t kSamplerStream = 1;
constexpr std::uint64_t kForestStream = 0x5000;
constexpr std::uint64_t kProposeStream = 0x7000;
constexpr std::uint64_t kRandomStream = 0x9000;

void record(SearchState& st, SampleRecord rec) {
  st.samples.push_back(std::move(rec));
  const auto& r = st.samples.back();
  if (r.feasible && (st.best < 0 || r.accuracy > st.samples[st.best].accuracy)) {
    st.best = static_cast<int>(st.samples.size()) - 1;
  }
  st.trace.push_back(st.best < 0 ? 0.0 : st.samples[st.best].accuracy);
}

double evaluate_or_abort(const Evaluator& evaluate, const QuantScheme& s,
                         const SearchState& st) {
  try {
    return evaluate(s);
  } catch (const std::exception& e) {
    throw SearchAborted("evaluation of " + s.to_string() + " failed: " + e.what(), st);
  }
}

SearchResult finish(SearchState st) {
  if (st.best < 0) throw Error("search evaluated no feasible scheme");
  SearchResult r;
  const auto& b = st.samples[st.best];
  r.best = b.scheme;
  r.accuracy = b.accuracy;
  r.cost = b.cost;
  r.state = std::move(st);
  return r;
}

SamplerConfig sampler_for(const CostTable& cost, const SearchConfig& cfg) {
  auto sc = cfg.sampler;
  if (sc.bitwidths.bits != cost.bitwidths().bits) {
    throw ValidationError("sampler and cost table use different bitwidth sets");
  }
  sc.seed = derive_seed(cfg.seed, kSamplerStream);
  return sc;
}

QuantScheme uniform_scheme(std::size_t L, int b) {
  return {std::vector<LayerBits>(L, LayerBits{b, b})};
}

}  // namespace

const char* to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::kPtq: return "ptq";
    case SearchMode::kQat: return "qat";
    case SearchMode::kOracle: return "oracle";
  }
  return "?";
}

SearchMode search_mode_from_string(const std::string& s) {
  if (s == "ptq") return SearchMode::kPtq;
  if (s == "qat") return SearchMode::kQat;
  if (s == "oracle") return SearchMode::kOracle;
  throw ValidationError("unknown search mode '" + s + "'");
}

const char* to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::kRfOnly: return "rf-only";
    case AblationVariant::kOrthogonal: return "+orthogonal";
    case AblationVariant::kFull: return "+near-constraint";
  }
  return "?";
}

void SearchConfig::validate() const {
  sampler.validate();
  forest.validate();
  if (absolute) {
    if (!(*absolute > 0.0)) throw ValidationError("absolute constraint must be > 0");
  } else if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ValidationError("constraint ratio must lie in (0, 1]");
  }
  if (budget < sampler.n_init) {
    throw ValidationError("budget (" + std::to_string(budget) +
                          ") must be at least n_init (" + std::to_string(sampler.n_init) + ")");
  }
}

json to_json(const SearchConfig& cfg) {
  json j = {{"mode", to_string(cfg.mode)},
            {"cost_kind", cfg.cost_kind},
            {"budget", cfg.budget},
            {"sampler", to_json(cfg.sampler)},
            {"forest", to_json(cfg.forest)},
            {"seed", cfg.seed},
            {"orthogonal_init", cfg.orthogonal_init},
            {"near_constraint", cfg.near_constraint}};
  if (cfg.absolute) {
    j["constraint_absolute"] = *cfg.absolute;
  } else {
    j["constraint_ratio"] = cfg.ratio;
  }
  return j;
}

double resolve_constraint(const CostTable& cost, const SearchConfig& cfg) {
  if (cfg.absolute) return *cfg.absolute;
  const int hi = cost.bitwidths().max();
  return cfg.ratio * cost.total(uniform_scheme(cost.num_layers(), hi));
}

SearchResult explore(const CostTable& cost, const SearchConfig& cfg,
                     const Evaluator& evaluate) {
  cfg.validate();
  const auto L = cost.num_layers();
  const auto sc = sampler_for(cost, cfg);
  SearchState st;
  st.constraint = resolve_constraint(cost, cfg);
  const double floor = cost.total(uniform_scheme(L, sc.bitwidths.min()));
  if (floor > st.constraint) {
    throw InfeasibleConstraint("the all-" + std::to_string(sc.bitwidths.min()) +
                               "-bit scheme costs " + std::to_string(floor) +
                               " > constraint " + std::to_string(st.constraint));
  }

  std::set<QuantScheme> evaluated;
  const auto initial = cfg.orthogonal_init ? initial_samples(L, sc) : random_samples(L, sc);
  for (const auto& s : initial) {
    if (!evaluated.insert(s).second) continue;
    const double acc = evaluate_or_abort(evaluate, s, st);
    const double c = cost.total(s);
    record(st, {s, acc, c, c <= st.constraint, true});
  }
  if (st.samples.size() < 2) {
    throw ValidationError("search space too small for a surrogate");
  }

  const int T = cfg.budget - static_cast<int>(st.samples.size());
  for (int t = 0; t < T; ++t) {
    std::vector<AccuracySample> data;
    data.reserve(st.samples.size());
    for (const auto& r : st.samples) data.emplace_back(r.scheme, r.accuracy);
    auto fc = cfg.forest;
    fc.seed = derive_seed(cfg.seed, kForestStream + static_cast<std::uint64_t>(t));
    const auto forest = fit_surrogate(data, fc);
    const Band b = cfg.near_constraint ? band(t, std::max(T - 1, 0), st.constraint, sc)
                                       : Band{0.0, st.constraint};
    const auto next = propose(forest, cost, b, sc, evaluated,
                              kProposeStream + static_cast<std::uint64_t>(t));
    if (!next) break;
    evaluated.insert(*next);
    const double acc = evaluate_or_abort(evaluate, *next, st);
    const double c = cost.total(*next);
    record(st, {*next, acc, c, c <= st.constraint, false});
    ++st.iteration;
  }
  return finish(std::move(st));
}

SearchResult random_search(const CostTable& cost, const SearchConfig& cfg,
                           const Evaluator& evaluate) {
  cfg.validate();
  const auto L = cost.num_layers();
  const auto sc = sampler_for(cost, cfg);
  SearchState st;
  st.constraint = resolve_constraint(cost, cfg);
  if (cost.total(uniform_scheme(L, sc.bitwidths.min())) > st.constraint) {
    throw InfeasibleConstraint("constraint below the cheapest scheme");
  }
  Rng rng(derive_seed(cfg.seed, kRandomStream));
  const auto pairs = sc.bitwidths.pairs();
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  std::set<QuantScheme> evaluated;
  const long max_draws = 100000L * cfg.budget;
  for (long draw = 0; draw < max_draws &&
                      st.samples.size() < static_cast<std::size_t>(cfg.budget);
       ++draw) {
    QuantScheme s;
    for (std::size_t i = 0; i < L; ++i) s.pairs.push_back(pairs[pick(rng)]);
    const double c = cost.total(s);
    if (c > st.constraint || !evaluated.insert(s).second) continue;
    record(st, {s, evaluate_or_abort(evaluate, s, st), c, true, false});
  }
  return finish(std::move(st));
}

SearchResult exhaustive_best(const CostTable& cost, double constraint,
                             const Evaluator& evaluate, std::size_t limit) {
  const auto pairs = cost.bitwidths().pairs();
  const auto L = cost.num_layers();
  double space = std::pow(static_cast<double>(pairs.size()), static_cast<double>(L));
  if (space > static_cast<double>(limit)) {
    throw ValidationError("search space too large to enumerate");
  }
  std::vector<std::size_t> digit(L, 0);
  QuantScheme s{std::vector<LayerBits>(L, pairs[0])};
  std::optional<SampleRecord> best;
  for (;;) {
    const double c = cost.total(s);
    if (c <= constraint) {
      const double acc = evaluate(s);
      if (!best || acc > best->accuracy ||
          (acc == best->accuracy && (c < best->cost || (c == best->cost && s < best->scheme)))) {
        best = SampleRecord{s, acc, c, true, false};
      }
    }
    std::size_t i = 0;
    while (i < L && ++digit[i] == pairs.size()) {
      digit[i] = 0;
      s.pairs[i] = pairs[0];
      ++i;
    }
    if (i == L) break;
    s.pairs[i] = pairs[digit[i]];
  }
  SearchState st;
  st.constraint = constraint;
  if (best) record(st, *best);
  return finish(std::move(st));
}

std::vector<AblationRow> ablation_run(const CostTable& cost,
                                      const SearchConfig& cfg,
                                      const Evaluator& evaluate,
                                      const std::vector<AblationVariant>& variants,
                                      int repetitions) {
  if (variants.empty()) throw ValidationError("ablation needs at least one variant");
  if (repetitions < 1) throw ValidationError("ablation needs repetitions >= 1");
  std::vector<AblationRow> rows;
  for (auto v : variants) {
    AblationRow row;
    row.variant = v;
    for (int r = 0; r < repetitions; ++r) {
      auto c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(r);
      c.orthogonal_init = v != AblationVariant::kRfOnly;
      c.near_constraint = v == AblationVariant::kFull;
      row.best.push_back(explore(cost, c, evaluate).accuracy);
    }
    double sum = 0.0;
    for (double b : row.best) sum += b;
    row.mean = sum / static_cast<double>(row.best.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

json scheme_to_json(const QuantScheme& s) {
  json j = json::array();
  for (auto p : s.pairs) j.push_back({p.w, p.a});
  return j;
}

QuantScheme scheme_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("scheme must be an array of [w, a] pairs");
  QuantScheme s;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
        !p[1].is_number_integer()) {
      throw FormatError("scheme entries must be [w, a] integer pairs");
    }
    s.pairs.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  return s;
}

json to_json(const SearchResult& r, const SearchConfig& cfg) {
  json samples = json::array();
  for (const auto& s : r.state.samples) {
    samples.push_back({{"scheme", scheme_to_json(s.scheme)},
                       {"accuracy", s.accuracy},
                       {"cost", s.cost},
                       {"feasible", s.feasible},
                       {"initial", s.initial}});
  }
  return {{"config", to_json(cfg)},
          {"constraint", r.state.constraint},
          {"samples", samples},
          {"best",
           {{"index", r.state.best},
            {"scheme", scheme_to_json(r.best)},
            {"accuracy", r.accuracy},
            {"cost", r.cost}}},
          {"iterations", r.state.iteration},
          {"trace", r.state.trace}};
}

SearchResult result_from_json(const json& j) {
  SearchResult r;
  try {
    const auto& b = j.at("best");
    r.best = scheme_from_json(b.at("scheme"));
    r.accuracy = b.at("accuracy").get<double>();
    r.cost = b.at("cost").get<double>();
    r.state.best = b.value("index", -1);
    r.state.constraint = j.at("constraint").get<double>();
    r.state.trace = j.value("trace", std::vector<double>{});
    r.state.iteration = j.value("iterations", 0);
    for (const auto& s : j.value("samples", json::array())) {
      r.state.samples.push_back({scheme_from_json(s.at("scheme")),
                                 s.at("accuracy").get<double>(),
                                 s.at("cost").get<double>(),
                                 s.value("feasible", false), s.value("initial", false)});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("result: ") + e.what());
  }
  if (r.best.pairs.empty()) throw FormatError("result has an empty best scheme");
  return r;
}

}  // namespace mixq
