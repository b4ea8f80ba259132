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

#include "mixq/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>

#include "mixq/error.hpp"
#include "mixq/random.hpp"

namespace mixq {

using nlohmann::json;

double layer_bops(const LayerDesc& layer, LayerBits bits) {
  return static_cast<double>(bits.w) * bits.a * static_cast<double>(layer.macs);
}

double bops(const NetworkIR& net, const QuantScheme& scheme) {
  if (scheme.size() != net.size()) {
    throw ValidationError("scheme length does not match network");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    total += layer_bops(net.layers[i], scheme.pairs[i]);
  }
  return total;
}

CostFeatures layer_features(const LayerDesc& layer, LayerBits bits) {
  const double macs = static_cast<double>(layer.macs);
  return {std::max(bits.w, bits.a) * macs, bits.a * macs, bits.w * macs};
}

std::vector<CostFeatures> cost_features(const NetworkIR& net,
                                        const QuantScheme& scheme) {
  if (scheme.size() != net.size()) {
    throw ValidationError("scheme length does not match network");
  }
  std::vector<CostFeatures> out;
  out.reserve(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    out.push_back(layer_features(net.layers[i], scheme.pairs[i]));
  }
  return out;
}

OlsResult ols(const std::vector<std::vector<double>>& rows,
              std::span<const double> targets, bool intercept) {
  if (rows.empty() || rows.size() != targets.size()) {
    throw ValidationError("ols: need matching, non-empty rows and targets");
  }
  const auto p = rows.front().size() + (intercept ? 1 : 0);
  const auto n = rows.size();
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() + (intercept ? 1 : 0) != p) {
      throw ValidationError("ols: ragged design matrix");
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
    if (intercept) x(i, p - 1) = 1.0;
    y(i) = targets[i];
  }
  Eigen::VectorXd scale = x.cwiseAbs().colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (scale(j) == 0.0) scale(j) = 1.0;
  }
  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();

  OlsResult result;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  Eigen::VectorXd beta;
  if (qr.rank() == static_cast<Eigen::Index>(p) && n >= p) {
    beta = qr.solve(y);
  } else {
    result.ridge_fallback = true;
    const Eigen::MatrixXd gram =
        xs.transpose() * xs + 1e-6 * Eigen::MatrixXd::Identity(p, p);
    beta = gram.ldlt().solve(xs.transpose() * y);
  }
  beta = beta.cwiseQuotient(scale);
  result.coef.assign(beta.data(), beta.data() + beta.size());
  return result;
}

const char* to_string(ProxyKind kind) {
  switch (kind) {
    case ProxyKind::kBops: return "bops";
    case ProxyKind::kLinearBops: return "linear-bops";
    case ProxyKind::kLinearCbops: return "linear-cbops";
    case ProxyKind::kTreeCbops: return "tree-cbops";
  }
  return "?";
}

ProxyKind proxy_kind_from_string(const std::string& s) {
  if (s == "bops") return ProxyKind::kBops;
  if (s == "linear-bops") return ProxyKind::kLinearBops;
  if (s == "linear-cbops" || s == "linear") return ProxyKind::kLinearCbops;
  if (s == "tree-cbops" || s == "tree") return ProxyKind::kTreeCbops;
  throw ValidationError("unknown proxy kind '" + s + "'");
}

namespace {

std::vector<double> feature_row(ProxyKind kind, const LayerDesc& layer,
                                LayerBits bits) {
  if (kind == ProxyKind::kLinearBops) return {layer_bops(layer, bits)};
  const auto f = layer_features(layer, bits);
  return {f.bmacs, f.aloads, f.wloads};
}

double rmse(std::span<const double> predicted, std::span<const double> measured) {
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ss += (predicted[i] - measured[i]) * (predicted[i] - measured[i]);
  }
  return predicted.empty() ? 0.0 : std::sqrt(ss / predicted.size());
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw ValidationError("correlation undefined for zero-variance data");
  }
  return sab / std::sqrt(saa * sbb);
}

json linear_json(const ProxyModel::Linear& l) {
  return {{"beta", l.beta}, {"intercept", l.intercept}};
}

json report_json(const FitReport& r) {
  return {{"r2", r.r2},
          {"rmse", r.rmse},
          {"train_count", r.train_count},
          {"holdout_count", r.holdout_count},
          {"ridge_fallback", r.ridge_fallback}};
}

FitReport report_from_json(const json& j) {
  FitReport r;
  r.r2 = j.value("r2", 0.0);
  r.rmse = j.value("rmse", 0.0);
  r.train_count = j.value("train_count", std::size_t{0});
  r.holdout_count = j.value("holdout_count", std::size_t{0});
  r.ridge_fallback = j.value("ridge_fallback", false);
  return r;
}

}  // namespace

double r_squared(std::span<const double> predicted,
                 std::span<const double> measured) {
  if (predicted.size() != measured.size() || measured.empty()) {
    throw ValidationError("r_squared: size mismatch");
  }
  const double mean =
      std::accumulate(measured.begin(), measured.end(), 0.0) / measured.size();
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    ss_res += (measured[i] - predicted[i]) * (measured[i] - predicted[i]);
    ss_tot += (measured[i] - mean) * (measured[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

ProxyModel ProxyModel::bops_model() {
  ProxyModel m;
  m.kind_ = ProxyKind::kBops;
  m.fitted_ = true;
  return m;
}

bool ProxyModel::has_kernel(KernelKind k) const {
  if (kind_ == ProxyKind::kBops) return true;
  return kind_ == ProxyKind::kTreeCbops ? forests_.count(k) > 0
                                        : linear_.count(k) > 0;
}

const ProxyModel::Linear& ProxyModel::linear(KernelKind k) const {
  const auto it = linear_.find(k);
  if (it == linear_.end()) {
    throw Error(std::string("proxy has no linear model for ") + to_string(k));
  }
  return it->second;
}

const Forest& ProxyModel::forest(KernelKind k) const {
  const auto it = forests_.find(k);
  if (it == forests_.end()) {
    throw Error(std::string("proxy has no forest for ") + to_string(k));
  }
  return it->second;
}

double ProxyModel::predict_layer(const LayerDesc& layer, LayerBits bits) const {
  if (!fitted_) throw Error("proxy model is not fitted");
  if (kind_ == ProxyKind::kBops) return layer_bops(layer, bits);
  const auto kk = kernel_kind_of(layer);
  const auto row = feature_row(kind_, layer, bits);
  if (kind_ == ProxyKind::kTreeCbops) return forest(kk).predict(row);
  const auto& l = linear(kk);
  double v = l.intercept;
  for (std::size_t j = 0; j < row.size(); ++j) v += l.beta[j] * row[j];
  return v;
}

std::vector<double> ProxyModel::predict_layers(const NetworkIR& net,
                                               const QuantScheme& scheme) const {
  if (scheme.size() != net.size()) {
    throw ValidationError("scheme length does not match network");
  }
  std::vector<double> out(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    out[i] = predict_layer(net.layers[i], scheme.pairs[i]);
  }
  return out;
}

json ProxyModel::to_json() const {
  json j;
  j["kind"] = to_string(kind_);
  j["fit_report"] = report_json(report_);
  j["kernels"] = json::object();
  for (const auto& [k, l] : linear_) {
    j["kernels"][to_string(k)]["linear"] = linear_json(l);
  }
  for (const auto& [k, f] : forests_) {
    j["kernels"][to_string(k)]["forest"] = f.to_json();
  }
  for (const auto& [k, r] : kernel_reports_) {
    j["kernels"][to_string(k)]["fit_report"] = report_json(r);
  }
  if (kind_ == ProxyKind::kTreeCbops) {
    j["forest_config"] = mixq::to_json(options_.forest);
  }
  j["holdout_fraction"] = options_.holdout_fraction;
  j["seed"] = options_.seed;
  return j;
}

ProxyModel ProxyModel::from_json(const json& j) {
  ProxyModel m;
  try {
    m.kind_ = proxy_kind_from_string(j.at("kind").get<std::string>());
    m.fitted_ = true;
    if (j.contains("fit_report")) m.report_ = report_from_json(j["fit_report"]);
    if (j.contains("kernels")) {
      for (const auto& [name, jk] : j["kernels"].items()) {
        const auto k = kernel_kind_from_string(name);
        if (jk.contains("linear")) {
          Linear l;
          l.beta = jk["linear"].at("beta").get<std::vector<double>>();
          l.intercept = jk["linear"].at("intercept").get<double>();
          m.linear_[k] = std::move(l);
        }
        if (jk.contains("forest")) m.forests_[k] = Forest::from_json(jk["forest"]);
        if (jk.contains("fit_report")) {
          m.kernel_reports_[k] = report_from_json(jk["fit_report"]);
        }
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("proxy: ") + e.what());
  }
  return m;
}

ProxyModel fit_proxy(const HardwareProfile& profile, ProxyKind kind,
                     const FitOptions& options) {
  if (kind == ProxyKind::kBops) return ProxyModel::bops_model();
  if (!(options.holdout_fraction >= 0.0 && options.holdout_fraction < 1.0)) {
    throw ValidationError("holdout fraction must lie in [0, 1)");
  }
  ProxyModel model;
  model.kind_ = kind;
  model.options_ = options;
  if (kind == ProxyKind::kTreeCbops) model.options_.forest.seed = options.seed;

  std::vector<double> pooled_pred, pooled_meas;
  for (auto kk : {KernelKind::kMatMul, KernelKind::kConv2D}) {
    std::vector<std::vector<double>> rows;
    std::vector<double> cycles;
    for (const auto& r : profile.records) {
      if (r.kernel != kk) continue;
      rows.push_back(feature_row(kind, layer_from_dims(kk, r.dims), {r.bw, r.ba}));
      cycles.push_back(static_cast<double>(r.cycles));
    }
    if (rows.empty()) continue;
    if (rows.size() < options.min_records) {
      throw ValidationError(std::string("profile has only ") +
                            std::to_string(rows.size()) + " " + to_string(kk) +
                            " records; need " +
                            std::to_string(options.min_records));
    }

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(kk)));
    std::shuffle(order.begin(), order.end(), rng);
    const auto holdout = static_cast<std::size_t>(
        std::lround(options.holdout_fraction * static_cast<double>(rows.size())));

    std::vector<std::vector<double>> train_x, test_x;
    std::vector<double> train_y, test_y;
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& xs = i < holdout ? test_x : train_x;
      auto& ys = i < holdout ? test_y : train_y;
      xs.push_back(rows[order[i]]);
      ys.push_back(cycles[order[i]]);
    }

    FitReport rep;
    rep.train_count = train_x.size();
    rep.holdout_count = test_x.size();
    std::vector<double> pred;
    if (kind == ProxyKind::kTreeCbops) {
      auto cfg = model.options_.forest;
      cfg.seed = derive_seed(options.seed, 100 + static_cast<std::uint64_t>(kk));
      auto forest = Forest::fit(train_x, train_y, cfg);
      for (const auto& x : test_x) pred.push_back(forest.predict(x));
      model.forests_[kk] = std::move(forest);
    } else {
      const auto fit = ols(train_x, train_y, true);
      ProxyModel::Linear l;
      l.beta.assign(fit.coef.begin(), fit.coef.end() - 1);
      l.intercept = fit.coef.back();
      rep.ridge_fallback = fit.ridge_fallback;
      for (const auto& x : test_x) {
        double v = l.intercept;
        for (std::size_t j = 0; j < x.size(); ++j) v += l.beta[j] * x[j];
        pred.push_back(v);
      }
      model.linear_[kk] = std::move(l);
    }
    if (!test_y.empty()) {
      rep.r2 = r_squared(pred, test_y);
      rep.rmse = rmse(pred, test_y);
    }
    pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
    pooled_meas.insert(pooled_meas.end(), test_y.begin(), test_y.end());
    model.report_.train_count += rep.train_count;
    model.report_.holdout_count += rep.holdout_count;
    model.report_.ridge_fallback |= rep.ridge_fallback;
    model.kernel_reports_[kk] = rep;
  }
  if (model.kernel_reports_.empty()) {
    throw ValidationError("profile has no records");
  }
  if (!pooled_meas.empty()) {
    model.report_.r2 = r_squared(pooled_pred, pooled_meas);
    model.report_.rmse = rmse(pooled_pred, pooled_meas);
  }
  model.fitted_ = true;
  return model;
}

ProxyModel load_proxy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return ProxyModel::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_proxy(const ProxyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << model.to_json().dump(2) << "\n";
}

double predict_latency(const ProxyModel& model, const NetworkIR& net,
                       const QuantScheme& scheme) {
  const auto layers = model.predict_layers(net, scheme);
  return std::max(0.0, std::accumulate(layers.begin(), layers.end(), 0.0));
}

CorrelationReport correlate(std::span<const double> predicted,
                            std::span<const double> measured) {
  if (predicted.size() != measured.size()) {
    throw ValidationError("correlate: size mismatch");
  }
  if (predicted.size() < 2) {
    throw ValidationError("correlation needs at least 2 points");
  }
  CorrelationReport r;
  r.count = predicted.size();
  const double rho = pearson(predicted, measured);
  r.r2 = rho * rho;
  const auto rp = average_ranks(predicted);
  const auto rm = average_ranks(measured);
  r.rank_corr = pearson(rp, rm);
  return r;
}

CorrelationReport correlation_report(const ProxyModel& model,
                                     const NetworkIR& net,
                                     const std::vector<QuantScheme>& schemes,
                                     const HwConfig& simulator) {
  std::vector<double> predicted, measured;
  for (const auto& s : schemes) {
    predicted.push_back(predict_latency(model, net, s));
    measured.push_back(static_cast<double>(simulate(net, s, simulator)));
  }
  return correlate(predicted, measured);
}

}  // namespace mixq
