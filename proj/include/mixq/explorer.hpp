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


#ifndef MIXQ_EXPLORER_HPP_
#define MIXQ_EXPLORER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/error.hpp"
#include "mixq/eval.hpp"
#include "mixq/sampler.hpp"
#include "mixq/surrogate.hpp"

namespace mixq {

enum class SearchMode { kPtq, kQat, kOracle };

const char* to_string(SearchMode mode);
SearchMode search_mode_from_string(const std::string& s);

struct SearchConfig {
  SearchMode mode = SearchMode::kOracle;
  std::string cost_kind = "bops";  // "bops" or a proxy kind name
  double ratio = 1.0;              // fraction of the uniform b_max cost
  std::optional<double> absolute;  // overrides ratio when set
  int budget = 48;
  SamplerConfig sampler;
  ForestConfig forest;
  std::uint64_t seed = 0;
  // Ablation switches: orthogonal initial samples and the shrinking band.
  bool orthogonal_init = true;
  bool near_constraint = true;

  void validate() const;
};

nlohmann::json to_json(const SearchConfig& cfg);

struct SampleRecord {
  QuantScheme scheme;
  double accuracy = 0.0;
  double cost = 0.0;
  bool feasible = false;
  bool initial = false;
};

struct SearchState {
  double constraint = 0.0;
  std::vector<SampleRecord> samples;
  int best = -1;                // index into samples
  int iteration = 0;            // search iterations completed
  std::vector<double> trace;    // best feasible accuracy after each sample
};

struct SearchResult {
  QuantScheme best;
  double accuracy = 0.0;
  double cost = 0.0;
  SearchState state;
};

// Thrown when the evaluator fails mid-search; carries the state so far.
class SearchAborted : public Error {
 public:
  SearchAborted(const std::string& what, SearchState partial)
      : Error(what), partial_(std::move(partial)) {}
  const SearchState& partial() const { return partial_; }

 private:
  SearchState partial_;
};

double resolve_constraint(const CostTable& cost, const SearchConfig& cfg);

// Surrogate-guided search. Initial samples that duplicate an earlier one
// are skipped without consuming budget; the search stops early only when no
// unevaluated feasible scheme can be found.
SearchResult explore(const CostTable& cost, const SearchConfig& cfg,
                     const Evaluator& evaluate);

// Best of `budget` distinct uniformly random feasible schemes.
SearchResult random_search(const CostTable& cost, const SearchConfig& cfg,
                           const Evaluator& evaluate);

// Highest-accuracy feasible scheme by enumeration (ties: lower cost, then
// scheme order). Throws ValidationError when the space exceeds `limit`.
SearchResult exhaustive_best(const CostTable& cost, double constraint,
                             const Evaluator& evaluate,
                             std::size_t limit = 1u << 20);

enum class AblationVariant { kRfOnly, kOrthogonal, kFull };

const char* to_string(AblationVariant v);

struct AblationRow {
  AblationVariant variant = AblationVariant::kFull;
  std::vector<double> best;  // per repetition
  double mean = 0.0;
};

// Runs each variant with seeds cfg.seed + r for r < repetitions.
std::vector<AblationRow> ablation_run(const CostTable& cost,
                                      const SearchConfig& cfg,
                                      const Evaluator& evaluate,
                                      const std::vector<AblationVariant>& variants,
                                      int repetitions);

nlohmann::json scheme_to_json(const QuantScheme& s);
QuantScheme scheme_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SearchResult& r, const SearchConfig& cfg);
// Parses the parts of a result file consumers need (best, samples, trace).
SearchResult result_from_json(const nlohmann::json& j);

}  // namespace mixq

#endif  // MIXQ_EXPLORER_HPP_
