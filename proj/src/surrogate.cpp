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

#include "mixq/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "mixq/error.hpp"
#include "mixq/random.hpp"

namespace mixq {
namespace {

using Matrix = std::vector<std::vector<double>>;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Gains closer than this are rounding noise on the same partition quality.
double tie_eps(double parent) { return 1e-10 * std::max(1.0, std::abs(parent)); }

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<double>& y,
              const ForestConfig& cfg, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), rng_(rng) {
    const auto p = x.front().size();
    mtry_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.feature_subset * p)));
    mtry_ = std::min(mtry_, p);
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    RegressionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int grow(RegressionTree& tree, std::vector<std::size_t> rows, int depth) {
    auto& nodes = tree.mutable_nodes();
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    double sum = 0.0;
    for (auto r : rows) sum += y_[r];
    const auto n = rows.size();
    nodes[id].value = sum / static_cast<double>(n);
    nodes[id].samples = static_cast<int>(n);

    const bool pure = std::all_of(rows.begin(), rows.end(), [&](auto r) {
      return y_[r] == y_[rows.front()];
    });
    const bool depth_capped = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
    if (pure || depth_capped ||
        n < 2 * static_cast<std::size_t>(cfg_.min_samples_leaf)) {
      return id;
    }

    const Split split = choose_split(rows, sum);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_[r][split.feature] <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    nodes[id].feature = split.feature;
    nodes[id].threshold = split.threshold;
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }

  // Best threshold on one feature; gain is the SSE reduction.
  Split best_on_feature(const std::vector<std::size_t>& rows, int feature,
                        double total) {
    order_.assign(rows.begin(), rows.end());
    std::stable_sort(order_.begin(), order_.end(), [&](auto a, auto b) {
      return x_[a][feature] < x_[b][feature];
    });
    const auto n = order_.size();
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
    const double parent = total * total / static_cast<double>(n);
    Split best;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += y_[order_[i]];
      const double lo = x_[order_[i]][feature];
      const double hi = x_[order_[i + 1]][feature];
      const std::size_t nl = i + 1, nr = n - nl;
      if (lo == hi || nl < min_leaf || nr < min_leaf) continue;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(nl) +
                          right_sum * right_sum / static_cast<double>(nr) -
                          parent;
      if (best.feature < 0 || gain > best.gain + tie_eps(parent)) {
        best = {feature, 0.5 * (lo + hi), gain};
      }
    }
    return best;
  }

  Split choose_split(const std::vector<std::size_t>& rows, double total) {
    const auto p = static_cast<int>(x_.front().size());
    std::vector<int> features(p);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng_);

    const double eps = tie_eps(total * total / static_cast<double>(rows.size()));
    auto better = [eps](const Split& a, const Split& b) {
      if (b.feature < 0) return a.feature >= 0;
      if (a.feature < 0) return false;
      if (std::abs(a.gain - b.gain) > eps) return a.gain > b.gain;
      if (a.feature != b.feature) return a.feature < b.feature;
      return a.threshold < b.threshold;
    };

    std::vector<int> first(features.begin(), features.begin() + mtry_);
    std::sort(first.begin(), first.end());
    Split best;
    for (int f : first) {
      const auto s = best_on_feature(rows, f, total);
      if (better(s, best)) best = s;
    }
    // Keep drawing features until one admits a split.
    for (std::size_t i = mtry_; best.feature < 0 && i < features.size(); ++i) {
      best = best_on_feature(rows, features[i], total);
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<double>& y_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> order_;
};

RegressionTree build_tree(const Matrix& x, const std::vector<double>& y,
                          const ForestConfig& cfg, int tree_index) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(tree_index)));
  std::vector<std::size_t> rows(y.size());
  if (cfg.bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, y.size() - 1);
    for (auto& r : rows) r = pick(rng);
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  return TreeBuilder(x, y, cfg, rng).build(std::move(rows));
}

}  // namespace

void ForestConfig::validate() const {
  if (n_trees < 1) throw ValidationError("forest needs n_trees >= 1");
  if (!(feature_subset > 0.0 && feature_subset <= 1.0)) {
    throw ValidationError("feature_subset must lie in (0, 1]");
  }
  if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
  if (max_depth < 0) throw ValidationError("max_depth must be >= 0");
}

nlohmann::json to_json(const ForestConfig& cfg) {
  return {{"n_trees", cfg.n_trees},
          {"max_depth", cfg.max_depth},
          {"min_samples_leaf", cfg.min_samples_leaf},
          {"feature_subset", cfg.feature_subset},
          {"bootstrap", cfg.bootstrap},
          {"seed", cfg.seed}};
}

double RegressionTree::predict(std::span<const double> x) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const auto& node = nodes_[id];
    id = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].value;
}

Forest Forest::fit(const Matrix& rows, const std::vector<double>& targets,
                   const ForestConfig& cfg) {
  cfg.validate();
  if (rows.size() != targets.size()) {
    throw ValidationError("forest: row/target count mismatch");
  }
  if (rows.size() < 2) throw ValidationError("forest needs at least 2 samples");
  const auto p = rows.front().size();
  if (p == 0 || std::any_of(rows.begin(), rows.end(),
                            [&](const auto& r) { return r.size() != p; })) {
    throw ValidationError("forest: rows must share a nonzero feature count");
  }

  Forest forest;
  forest.cfg_ = cfg;
  forest.num_features_ = p;
  forest.trees_.resize(static_cast<std::size_t>(cfg.n_trees));

  const int workers = std::clamp(cfg.threads, 1, cfg.n_trees);
  auto work = [&](int w) {
    for (int t = w; t < cfg.n_trees; t += workers) {
      forest.trees_[static_cast<std::size_t>(t)] =
          build_tree(rows, targets, cfg, t);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return forest;
}

double Forest::predict(std::span<const double> x) const {
  return predict_with_spread(x).mean;
}

Forest::Spread Forest::predict_with_spread(std::span<const double> x) const {
  if (!fitted()) throw Error("forest is not fitted");
  if (x.size() != num_features_) {
    throw ValidationError("forest: expected " + std::to_string(num_features_) +
                          " features, got " + std::to_string(x.size()));
  }
  std::vector<double> values;
  values.reserve(trees_.size());
  for (const auto& t : trees_) values.push_back(t.predict(x));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return {*lo, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

nlohmann::json Forest::to_json() const {
  nlohmann::json j;
  j["config"] = mixq::to_json(cfg_);
  j["num_features"] = num_features_;
  j["trees"] = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes()) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value,
                       n.samples});
    }
    j["trees"].push_back(std::move(nodes));
  }
  return j;
}

Forest Forest::from_json(const nlohmann::json& j) {
  Forest f;
  const auto& c = j.at("config");
  f.cfg_.n_trees = c.at("n_trees").get<int>();
  f.cfg_.max_depth = c.at("max_depth").get<int>();
  f.cfg_.min_samples_leaf = c.at("min_samples_leaf").get<int>();
  f.cfg_.feature_subset = c.at("feature_subset").get<double>();
  f.cfg_.bootstrap = c.at("bootstrap").get<bool>();
  f.cfg_.seed = c.at("seed").get<std::uint64_t>();
  f.num_features_ = j.at("num_features").get<std::size_t>();
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt) {
      t.mutable_nodes().push_back({jn[0].get<int>(), jn[1].get<double>(),
                                   jn[2].get<int>(), jn[3].get<int>(),
                                   jn[4].get<double>(), jn[5].get<int>()});
    }
    f.trees_.push_back(std::move(t));
  }
  return f;
}

std::vector<double> encode_scheme(const QuantScheme& scheme) {
  std::vector<double> out;
  out.reserve(2 * scheme.size());
  for (const auto& p : scheme.pairs) {
    out.push_back(p.w);
    out.push_back(p.a);
  }
  return out;
}

Forest fit_surrogate(const std::vector<AccuracySample>& samples,
                     const ForestConfig& cfg) {
  Matrix x;
  std::vector<double> y;
  for (const auto& [scheme, acc] : samples) {
    x.push_back(encode_scheme(scheme));
    y.push_back(acc);
  }
  return Forest::fit(x, y, cfg);
}

double predict(const Forest& forest, const QuantScheme& scheme) {
  return forest.predict(encode_scheme(scheme));
}

Forest::Spread predict_with_spread(const Forest& forest,
                                   const QuantScheme& scheme) {
  return forest.predict_with_spread(encode_scheme(scheme));
}

}  // namespace mixq
