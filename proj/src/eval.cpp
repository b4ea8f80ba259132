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


#include "mixq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixq/container.hpp"
#include "mixq/error.hpp"
#include "mixq/executor.hpp"
#include "mixq/quant.hpp"
#include "mixq/random.hpp"

namespace mixq {
namespace {

double g(int b) { return 1.0 - std::ldexp(1.0, -b); }
double drop(int b) { return g(8) - g(b); }
double cliff(int b) { return std::max(0, 4 - b) / 3.0; }

}  // namespace

SyntheticOracle SyntheticOracle::make(std::size_t num_layers, std::uint64_t seed) {
  if (num_layers == 0) throw ValidationError("oracle needs at least one layer");
  SyntheticOracle o;
  o.seed = seed;
  Rng rng(derive_seed(seed, 0x0AC1E));
  std::uniform_real_distribution<double> u(0.5, 1.5), v(0.0, 1.0);
  const double L = static_cast<double>(num_layers);
  for (std::size_t i = 0; i < num_layers; ++i) {
    const double edge = (i == 0 || i + 1 == num_layers) ? 2.0 : 1.0;
    o.s.push_back(edge * u(rng) * 0.6 / L);
    o.t.push_back(edge * u(rng) * 0.4 / L);
    o.cw.push_back(edge * u(rng) * 0.15 / L);
    o.ca.push_back(edge * u(rng) * 0.10 / L);
  }
  for (std::size_t i = 0; i + 1 < num_layers; ++i) o.u.push_back(v(rng) * 0.4 / L);
  return o;
}

double SyntheticOracle::accuracy(const QuantScheme& scheme) const {
  if (scheme.size() != s.size()) {
    throw ValidationError("scheme has " + std::to_string(scheme.size()) +
                          " layers, oracle " + std::to_string(s.size()));
  }
  double acc = acc_max;
  const auto& p = scheme.pairs;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].w < 1 || p[i].w > 8 || p[i].a < 1 || p[i].a > 8) {
      throw ValidationError("oracle bitwidths must lie in [1, 8]");
    }
    acc -= s[i] * drop(p[i].w) + t[i] * drop(p[i].a);
    acc -= cw[i] * cliff(p[i].w) + ca[i] * cliff(p[i].a);
    if (i + 1 < p.size()) acc -= u[i] * drop(p[i].a) * drop(p[i + 1].w);
  }
  return std::clamp(acc, 0.0, 1.0);
}

nlohmann::json to_json(const SyntheticOracle& o) {
  return {{"acc_max", o.acc_max}, {"s", o.s},   {"t", o.t},        {"cw", o.cw},
          {"ca", o.ca},           {"u", o.u},   {"seed", o.seed}};
}

SyntheticOracle oracle_from_json(const nlohmann::json& j) {
  SyntheticOracle o;
  try {
    o.acc_max = j.at("acc_max").get<double>();
    o.s = j.at("s").get<std::vector<double>>();
    o.t = j.at("t").get<std::vector<double>>();
    o.cw = j.at("cw").get<std::vector<double>>();
    o.ca = j.at("ca").get<std::vector<double>>();
    o.u = j.at("u").get<std::vector<double>>();
    o.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("oracle: ") + e.what());
  }
  const auto L = o.s.size();
  if (L == 0 || o.t.size() != L || o.cw.size() != L || o.ca.size() != L ||
      o.u.size() + 1 != L) {
    throw FormatError("oracle: inconsistent parameter lengths");
  }
  return o;
}

Dataset make_cluster_dataset(std::uint64_t seed, int features, int classes,
                             int train, int test) {
  if (features < 1 || classes < 2 || train < 1 || test < 1) {
    throw ValidationError("invalid data set dimensions");
  }
  Dataset ds;
  ds.features = features;
  ds.classes = classes;
  Rng rng(derive_seed(seed, 0xDA7A));
  std::normal_distribution<double> center(0.0, 1.0), noise(0.0, 1.0);
  std::vector<double> means(static_cast<std::size_t>(classes * features));
  for (auto& m : means) m = center(rng);
  std::uniform_int_distribution<int> label(0, classes - 1);
  auto draw = [&](int n, std::vector<float>& x, std::vector<int>& y) {
    for (int i = 0; i < n; ++i) {
      const int c = label(rng);
      y.push_back(c);
      for (int f = 0; f < features; ++f) {
        x.push_back(static_cast<float>(means[c * features + f] + noise(rng)));
      }
    }
  };
  draw(train, ds.train_x, ds.train_y);
  draw(test, ds.test_x, ds.test_y);
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  auto labels = [](const std::vector<int>& y) {
    return std::vector<float>(y.begin(), y.end());
  };
  const auto f = static_cast<std::uint32_t>(ds.features);
  const auto ntr = static_cast<std::uint32_t>(ds.train_count());
  const auto nte = static_cast<std::uint32_t>(ds.test_count());
  const auto ytr = labels(ds.train_y), yte = labels(ds.test_y);
  std::vector<TensorRecord> recs = {
      TensorRecord::from_floats(0, Role::kDataset, {ntr, f}, ds.train_x),
      TensorRecord::from_floats(1, Role::kDataset, {ntr}, ytr),
      TensorRecord::from_floats(2, Role::kDataset, {nte, f}, ds.test_x),
      TensorRecord::from_floats(3, Role::kDataset, {nte}, yte)};
  write_container(path, recs);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto recs = read_container(path);
  if (recs.size() != 4) throw FormatError(path.string() + ": expected 4 data set records");
  for (std::uint32_t i = 0; i < 4; ++i) {
    if (recs[i].role != Role::kDataset || recs[i].layer != i) {
      throw FormatError(path.string() + ": unexpected record order");
    }
  }
  if (recs[0].dims.size() != 2 || recs[2].dims.size() != 2 ||
      recs[0].dims[1] != recs[2].dims[1] || recs[1].numel() != recs[0].dims[0] ||
      recs[3].numel() != recs[2].dims[0]) {
    throw FormatError(path.string() + ": inconsistent data set shapes");
  }
  Dataset ds;
  ds.features = static_cast<int>(recs[0].dims[1]);
  ds.train_x = recs[0].floats();
  ds.test_x = recs[2].floats();
  int max_label = 0;
  auto labels = [&](const TensorRecord& r) {
    std::vector<int> y;
    for (float v : r.floats()) {
      if (v < 0 || v != std::floor(v)) throw FormatError("invalid class label");
      y.push_back(static_cast<int>(v));
      max_label = std::max(max_label, y.back());
    }
    return y;
  };
  ds.train_y = labels(recs[1]);
  ds.test_y = labels(recs[3]);
  ds.classes = max_label + 1;
  return ds;
}

Mlp::Mlp(std::vector<int> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw ValidationError("MLP needs at least one layer");
  Rng rng(derive_seed(seed, 0x1417));
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.in = widths[i];
    l.out = widths[i + 1];
    l.relu = i + 2 < widths.size();
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / l.in));
    l.w.resize(static_cast<std::size_t>(l.in * l.out));
    for (auto& w : l.w) w = init(rng);
    l.b.assign(static_cast<std::size_t>(l.out), 0.0);
    layers_.push_back(std::move(l));
  }
}

Mlp Mlp::from_network(const NetworkIR& net) {
  if (!net.has_weights()) throw ValidationError("network has no weights");
  Mlp m;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& d = net.layers[i];
    if (d.kind != LayerKind::kLinear || d.rows() != 1) {
      throw ValidationError("MLP training supports single-row Linear layers only");
    }
    Layer l;
    l.in = static_cast<int>(d.reduction());
    l.out = static_cast<int>(d.out_channels());
    l.relu = d.activation == Activation::kRelu;
    const auto& lw = net.weights.layers[i];
    l.w.assign(lw.weight.data.begin(), lw.weight.data.end());
    l.b.assign(lw.bias.data.begin(), lw.bias.data.end());
    if (l.b.empty()) l.b.assign(static_cast<std::size_t>(l.out), 0.0);
    m.layers_.push_back(std::move(l));
  }
  return m;
}

NetworkIR Mlp::to_network(const std::string& name) const {
  NetworkIR net;
  net.name = name;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto d = make_linear(l.in, l.out, 0, l.relu ? Activation::kRelu : Activation::kNone);
    d.index = static_cast<int>(i);
    net.layers.push_back(d);
    LayerWeights lw;
    lw.weight.dims = {l.out, l.in};
    lw.weight.data.assign(l.w.begin(), l.w.end());
    lw.bias.dims = {l.out};
    lw.bias.data.assign(l.b.begin(), l.b.end());
    net.weights.layers.push_back(std::move(lw));
  }
  return net;
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  std::vector<double> a(x.begin(), x.end());
  for (const auto& l : layers_) {
    std::vector<double> z(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
      double s = l.b[o];
      for (int k = 0; k < l.in; ++k) s += l.w[o * l.in + k] * a[k];
      z[o] = l.relu ? std::max(s, 0.0) : s;
    }
    a = std::move(z);
  }
  return a;
}

double Mlp::loss(std::span<const double> x, std::span<const int> y,
                 const QuantScheme* scheme, std::vector<Layer>* grad,
                 bool quantize_inputs) const {
  const auto L = layers_.size();
  if (scheme && scheme->size() != L) throw ValidationError("scheme/MLP size mismatch");
  const int in0 = layers_.front().in;
  const auto n = y.size();
  if (x.size() != n * static_cast<std::size_t>(in0) || n == 0) {
    throw ValidationError("loss: bad batch shape");
  }

  // Effective (possibly fake-quantized) weights and their STE masks.
  std::vector<std::vector<double>> wq(L);
  std::vector<std::vector<std::uint8_t>> wmask(L);
  std::vector<double> wscale(L, 1.0);
  for (std::size_t l = 0; l < L; ++l) {
    if (scheme) {
      auto fq = fake_quant(layers_[l].w, scheme->pairs[l].w);
      wscale[l] = fq.scale;
      wq[l] = std::move(fq.values);
      wmask[l] = std::move(fq.grad_mask);
    } else {
      wq[l] = layers_[l].w;
      wmask[l].assign(wq[l].size(), 1);
    }
  }
  if (grad) {
    *grad = layers_;
    for (auto& gl : *grad) {
      std::fill(gl.w.begin(), gl.w.end(), 0.0);
      std::fill(gl.b.begin(), gl.b.end(), 0.0);
    }
  }

  double total = 0.0;
  std::vector<std::vector<double>> inputs(L), pre(L);
  std::vector<std::vector<std::uint8_t>> amask(L);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> a(x.begin() + r * in0, x.begin() + (r + 1) * in0);
    for (std::size_t l = 0; l < L; ++l) {
      const auto& ly = layers_[l];
      // Integer inference rounds the bias onto the accumulator grid.
      double acc_scale = 0.0;
      if (scheme && quantize_inputs) {
        auto fq = fake_quant(a, scheme->pairs[l].a);
        acc_scale = wscale[l] * fq.scale;
        inputs[l] = std::move(fq.values);
        amask[l] = std::move(fq.grad_mask);
      } else {
        inputs[l] = a;
        amask[l].assign(a.size(), 1);
      }
      pre[l].assign(static_cast<std::size_t>(ly.out), 0.0);
      a.assign(static_cast<std::size_t>(ly.out), 0.0);
      for (int o = 0; o < ly.out; ++o) {
        double s = acc_scale > 0.0 ? std::round(ly.b[o] / acc_scale) * acc_scale : ly.b[o];
        for (int k = 0; k < ly.in; ++k) s += wq[l][o * ly.in + k] * inputs[l][k];
        pre[l][o] = s;
        a[o] = ly.relu ? std::max(s, 0.0) : s;
      }
    }
    const double mx = *std::max_element(a.begin(), a.end());
    double z = 0.0;
    for (double v : a) z += std::exp(v - mx);
    const int label = y[r];
    total += std::log(z) + mx - a[label];
    if (!grad) continue;

    std::vector<double> d(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
      d[c] = (std::exp(a[c] - mx) / z - (static_cast<int>(c) == label ? 1.0 : 0.0)) /
             static_cast<double>(n);
    }
    for (std::size_t l = L; l-- > 0;) {
      const auto& ly = layers_[l];
      auto& gl = (*grad)[l];
      if (ly.relu) {
        for (int o = 0; o < ly.out; ++o) {
          if (pre[l][o] <= 0.0) d[o] = 0.0;
        }
      }
      std::vector<double> dx(static_cast<std::size_t>(ly.in), 0.0);
      for (int o = 0; o < ly.out; ++o) {
        gl.b[o] += d[o];
        for (int k = 0; k < ly.in; ++k) {
          const auto idx = static_cast<std::size_t>(o * ly.in + k);
          if (wmask[l][idx]) gl.w[idx] += d[o] * inputs[l][k];
          dx[k] += wq[l][idx] * d[o];
        }
      }
      for (int k = 0; k < ly.in; ++k) {
        if (!amask[l][k]) dx[k] = 0.0;
      }
      d = std::move(dx);
    }
  }
  return total / static_cast<double>(n);
}

std::vector<double> train_sgd(Mlp& mlp, const Dataset& ds, const TrainConfig& cfg,
                              int epochs, const QuantScheme* scheme) {
  if (cfg.batch < 1 || !(cfg.lr > 0.0) || epochs < 0) {
    throw ValidationError("invalid training configuration");
  }
  Rng rng(derive_seed(cfg.seed, 0x59D));
  std::vector<std::size_t> order(ds.train_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto velocity = mlp.layers();
  for (auto& v : velocity) {
    std::fill(v.w.begin(), v.w.end(), 0.0);
    std::fill(v.b.begin(), v.b.end(), 0.0);
  }
  const auto f = static_cast<std::size_t>(ds.features);
  std::vector<double> losses;
  std::vector<Mlp::Layer> grad;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<double> x;
      std::vector<int> y;
      for (auto i = start; i < end; ++i) {
        const auto r = order[i];
        x.insert(x.end(), ds.train_x.begin() + r * f, ds.train_x.begin() + (r + 1) * f);
        y.push_back(ds.train_y[r]);
      }
      losses.push_back(mlp.loss(x, y, scheme, &grad));
      auto& layers = mlp.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        auto step = [&](std::vector<double>& p, std::vector<double>& v,
                        const std::vector<double>& gr) {
          for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = cfg.momentum * v[i] + gr[i];
            p[i] -= cfg.lr * v[i];
          }
        };
        step(layers[l].w, velocity[l].w, grad[l].w);
        step(layers[l].b, velocity[l].b, grad[l].b);
      }
    }
  }
  return losses;
}

double float_accuracy(const Mlp& mlp, const Dataset& ds) {
  const auto f = static_cast<std::size_t>(ds.features);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.test_count(); ++r) {
    std::vector<double> x(ds.test_x.begin() + r * f, ds.test_x.begin() + (r + 1) * f);
    const auto out = mlp.forward(x);
    const auto pred = std::max_element(out.begin(), out.end()) - out.begin();
    correct += pred == ds.test_y[r];
  }
  return static_cast<double>(correct) / static_cast<double>(ds.test_count());
}

TinyMlpFixture make_tiny_mlp(std::uint64_t seed) {
  TinyMlpFixture fx;
  fx.data = make_cluster_dataset(seed);
  fx.train.seed = seed;
  Mlp mlp({16, 32, 4}, seed);
  train_sgd(mlp, fx.data, fx.train, fx.train.epochs);
  fx.net = mlp.to_network("tiny_mlp");
  fx.net.float_accuracy = float_accuracy(mlp, fx.data);
  return fx;
}

double ptq_evaluate(const NetworkIR& net, const QuantScheme& scheme,
                    const Dataset& ds) {
  const auto qm = quantize_model(net, scheme);
  const auto f = static_cast<std::size_t>(ds.features);
  if (ds.test_count() == 0) throw ValidationError("empty test split");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.test_count(); ++r) {
    const std::span<const float> x(ds.test_x.data() + r * f, f);
    const auto logits = run_integer(net, qm, x);
    correct += argmax(logits) == static_cast<std::size_t>(ds.test_y[r]);
  }
  return static_cast<double>(correct) / static_cast<double>(ds.test_count());
}

int qat_epochs(int pretrain_epochs, QatBudget budget) {
  const int div = budget == QatBudget::kShort ? 20 : 10;
  return std::max(1, (pretrain_epochs + div - 1) / div);
}

double qat_evaluate(const NetworkIR& net, const QuantScheme& scheme,
                    const Dataset& ds, const TrainConfig& pretrain,
                    QatBudget budget, std::uint64_t seed) {
  validate_scheme(scheme, net);
  auto mlp = Mlp::from_network(net);
  auto cfg = pretrain;
  cfg.seed = derive_seed(seed, scheme_hash(scheme));
  train_sgd(mlp, ds, cfg, qat_epochs(pretrain.epochs, budget), &scheme);
  return ptq_evaluate(mlp.to_network(net.name), scheme, ds);
}

std::uint64_t scheme_hash(const QuantScheme& scheme) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto p : scheme.pairs) {
    for (int v : {p.w, p.a}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace mixq
