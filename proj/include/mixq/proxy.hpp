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

#ifndef MIXQ_PROXY_HPP_
#define MIXQ_PROXY_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/hwsim.hpp"
#include "mixq/model_ir.hpp"
#include "mixq/surrogate.hpp"

namespace mixq {

// BOPs = b_w * b_a * MACs, summed over layers.
double layer_bops(const LayerDesc& layer, LayerBits bits);
double bops(const NetworkIR& net, const QuantScheme& scheme);

// Bit-level cost features of one layer.
struct CostFeatures {
  double bmacs = 0.0;   // max(b_w, b_a) * MACs
  double aloads = 0.0;  // b_a * MACs
  double wloads = 0.0;  // b_w * MACs
};

CostFeatures layer_features(const LayerDesc& layer, LayerBits bits);
std::vector<CostFeatures> cost_features(const NetworkIR& net,
                                        const QuantScheme& scheme);

// Ordinary least squares with an optional intercept (stored last in coef).
// Columns are rescaled before a rank-revealing QR solve; a rank-deficient
// design falls back to ridge regression with lambda = 1e-6 on the rescaled
// columns.
struct OlsResult {
  std::vector<double> coef;
  bool ridge_fallback = false;
};

OlsResult ols(const std::vector<std::vector<double>>& rows,
              std::span<const double> targets, bool intercept);

enum class ProxyKind {
  kBops,         // raw BOPs, no fit
  kLinearBops,   // fitted 1-D line over BOPs per kernel kind
  kLinearCbops,  // beta_M*BMACs + beta_A*ALoads + beta_W*WLoads + C
  kTreeCbops,    // regression forest over (BMACs, ALoads, WLoads)
};

const char* to_string(ProxyKind kind);
ProxyKind proxy_kind_from_string(const std::string& s);

struct FitReport {
  double r2 = 0.0;  // coefficient of determination on the holdout split
  double rmse = 0.0;
  std::size_t train_count = 0;
  std::size_t holdout_count = 0;
  bool ridge_fallback = false;
};

struct FitOptions {
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
  std::size_t min_records = 8;
  ForestConfig forest;
};

class ProxyModel {
 public:
  struct Linear {
    std::vector<double> beta;  // BOPs: {slope}; CBOPs: {M, A, W}
    double intercept = 0.0;
  };

  ProxyModel() = default;
  static ProxyModel bops_model();

  ProxyKind kind() const { return kind_; }
  bool has_kernel(KernelKind k) const;
  const Linear& linear(KernelKind k) const;
  const Forest& forest(KernelKind k) const;
  const FitReport& report() const { return report_; }
  const std::map<KernelKind, FitReport>& kernel_reports() const {
    return kernel_reports_;
  }

  // Unclamped per-layer prediction.
  double predict_layer(const LayerDesc& layer, LayerBits bits) const;
  std::vector<double> predict_layers(const NetworkIR& net,
                                     const QuantScheme& scheme) const;

  nlohmann::json to_json() const;
  static ProxyModel from_json(const nlohmann::json& j);

 private:
  friend ProxyModel fit_proxy(const HardwareProfile&, ProxyKind,
                              const FitOptions&);

  ProxyKind kind_ = ProxyKind::kBops;
  bool fitted_ = false;
  std::map<KernelKind, Linear> linear_;
  std::map<KernelKind, Forest> forests_;
  std::map<KernelKind, FitReport> kernel_reports_;
  FitReport report_;
  FitOptions options_;
};

ProxyModel fit_proxy(const HardwareProfile& profile, ProxyKind kind,
                     const FitOptions& options = {});

ProxyModel load_proxy(const std::filesystem::path& path);
void save_proxy(const ProxyModel& model, const std::filesystem::path& path);

// Sum of per-layer predictions, clamped at zero.
double predict_latency(const ProxyModel& model, const NetworkIR& net,
                       const QuantScheme& scheme);

// r2 is the squared Pearson correlation between predictions and
// measurements (the R^2 of the best-fit line through the scatter);
// rank_corr is Spearman's rho with average ranks for ties.
struct CorrelationReport {
  double r2 = 0.0;
  double rank_corr = 0.0;
  std::size_t count = 0;
};

CorrelationReport correlate(std::span<const double> predicted,
                            std::span<const double> measured);

CorrelationReport correlation_report(const ProxyModel& model,
                                     const NetworkIR& net,
                                     const std::vector<QuantScheme>& schemes,
                                     const HwConfig& simulator);

// 1 - SS_res / SS_tot.
double r_squared(std::span<const double> predicted,
                 std::span<const double> measured);

}  // namespace mixq

#endif  // MIXQ_PROXY_HPP_
