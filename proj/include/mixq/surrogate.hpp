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

#ifndef MIXQ_SURROGATE_HPP_
#define MIXQ_SURROGATE_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/model_ir.hpp"

namespace mixq {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  double feature_subset = 1.0 / 3.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  // Worker threads for tree construction; results do not depend on it.
  int threads = 1;

  void validate() const;
};

nlohmann::json to_json(const ForestConfig& cfg);

// Axis-aligned binary regression tree. Internal nodes route x[feature] <=
// threshold to the left child.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int samples = 0;
  };

  double predict(std::span<const double> x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& mutable_nodes() { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

// Random-forest regressor built from CART trees with variance-reduction
// splits, bootstrap resampling and per-split feature subsampling.
class Forest {
 public:
  struct Spread {
    double mean = 0.0;
    double stdev = 0.0;
  };

  static Forest fit(const std::vector<std::vector<double>>& rows,
                    const std::vector<double>& targets,
                    const ForestConfig& cfg);

  bool fitted() const { return !trees_.empty(); }
  std::size_t num_features() const { return num_features_; }
  const ForestConfig& config() const { return cfg_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  double predict(std::span<const double> x) const;
  Spread predict_with_spread(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& j);

 private:
  ForestConfig cfg_;
  std::size_t num_features_ = 0;
  std::vector<RegressionTree> trees_;
};

// (b_w1, b_a1, ..., b_wL, b_aL) as raw bit values.
std::vector<double> encode_scheme(const QuantScheme& scheme);

using AccuracySample = std::pair<QuantScheme, double>;

Forest fit_surrogate(const std::vector<AccuracySample>& samples,
                     const ForestConfig& cfg);
double predict(const Forest& forest, const QuantScheme& scheme);
Forest::Spread predict_with_spread(const Forest& forest,
                                   const QuantScheme& scheme);

}  // namespace mixq

#endif  // MIXQ_SURROGATE_HPP_
