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


#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mixq/codegen.hpp"
#include "mixq/error.hpp"
#include "mixq/eval.hpp"
#include "mixq/executor.hpp"
#include "mixq/explorer.hpp"
#include "mixq/hwsim.hpp"
#include "mixq/kernels.hpp"
#include "mixq/proxy.hpp"
#include "mixq/quant.hpp"
#include "mixq/sampler.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace mixq {
namespace {

using PairList = std::vector<std::pair<int, int>>;

QuantScheme to_scheme(const PairList& pairs) {
  QuantScheme s;
  for (auto [w, a] : pairs) s.pairs.push_back({w, a});
  return s;
}

PairList from_scheme(const QuantScheme& s) {
  PairList out;
  for (const auto& p : s.pairs) out.emplace_back(p.w, p.a);
  return out;
}

HwConfig hw_from(const std::string& spec) {
  if (spec == "cpu-tiny") return HwConfig::cpu_tiny();
  if (spec == "cpu-small") return HwConfig::cpu_small();
  if (spec == "cpu-high") return HwConfig::cpu_high();
  if (spec == "systolic") return HwConfig::systolic_32x16();
  return load_hw_config(spec);
}

CostTable cost_table(const NetworkIR& net, const BitwidthSet& set, const std::string& proxy_json) {
  if (proxy_json.empty()) return CostTable::bops(net, set);
  return CostTable::proxy(ProxyModel::from_json(json::parse(proxy_json)), net, set);
}

}  // namespace
}  // namespace mixq

PYBIND11_MODULE(_mixq, m) {
  using namespace mixq;
  m.doc() = "Native core of mixq";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<OverflowError>(m, "OverflowError", base.ptr());
  py::register_exception<InfeasibleConstraint>(m, "InfeasibleConstraint", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<NetworkIR>(m, "Network")
      .def_readonly("name", &NetworkIR::name)
      .def_property_readonly("num_layers", &NetworkIR::size)
      .def_property_readonly("total_macs", &NetworkIR::total_macs)
      .def_property_readonly("has_weights", &NetworkIR::has_weights)
      .def_property_readonly("layer_macs", [](const NetworkIR& n) {
        std::vector<std::int64_t> out;
        for (const auto& l : n.layers) out.push_back(l.macs);
        return out;
      })
      .def("__repr__", [](const NetworkIR& n) {
        return "<Network " + n.name + " layers=" + std::to_string(n.size()) + ">";
      });

  m.def("load_network", &load_network, py::arg("path"));
  m.def("mlp", [](const std::vector<std::int64_t>& widths) {
    NetworkIR net;
    net.name = "mlp";
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      net.layers.push_back(make_linear(widths[i], widths[i + 1]));
      net.layers.back().index = i;
    }
    validate_network(net);
    return net;
  }, py::arg("widths"), "Weightless MLP description from layer widths.");

  m.def("dotp", [](int bw, int ba, std::uint32_t rs1, std::uint32_t rs2) {
    return dotp(make_op(bw, ba), rs1, rs2);
  }, py::arg("bw"), py::arg("ba"), py::arg("rs1"), py::arg("rs2"));
  m.def("quantize", [](const std::vector<float>& x, int bits) {
    const auto p = compute_scale(x, bits);
    return std::make_pair(quantize(x, p), p.scale);
  }, py::arg("x"), py::arg("bits"), "Returns (integers, scale).");
  m.def("pack", [](const std::vector<std::int32_t>& q, int bits) { return pack(q, bits).words; },
        py::arg("q"), py::arg("bits"));
  m.def("unpack", [](const std::vector<std::uint32_t>& words, int bits, std::size_t len) {
    PackedTensor t;
    t.bits = bits;
    t.len = len;
    t.words = words;
    return unpack(t);
  }, py::arg("words"), py::arg("bits"), py::arg("length"));
  m.def("matmul", [](const std::vector<std::vector<std::int32_t>>& act,
                     const std::vector<std::vector<std::int32_t>>& weight, int act_bits,
                     int weight_bits, bool packed) {
    auto to_matrix = [](const std::vector<std::vector<std::int32_t>>& rows) {
      IntMatrix mtx(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != mtx.cols) throw ValidationError("ragged matrix");
        std::copy(rows[r].begin(), rows[r].end(), mtx.data.begin() + r * mtx.cols);
      }
      return mtx;
    };
    const auto [out, stats] = matmul(to_matrix(act), to_matrix(weight), act_bits, weight_bits,
                                     packed ? KernelVariant::kPacked : KernelVariant::kRef);
    std::vector<std::vector<std::int32_t>> rows(out.rows);
    for (std::size_t r = 0; r < out.rows; ++r) {
      rows[r].assign(out.data.begin() + r * out.cols, out.data.begin() + (r + 1) * out.cols);
    }
    return rows;
  }, py::arg("act"), py::arg("weight"), py::arg("act_bits"), py::arg("weight_bits"),
     py::arg("packed") = true);

  m.def("bops", [](const NetworkIR& net, const PairList& s) { return bops(net, to_scheme(s)); },
        py::arg("network"), py::arg("scheme"));
  m.def("simulate", [](const NetworkIR& net, const PairList& s, const std::string& hw) {
    return simulate(net, to_scheme(s), hw_from(hw));
  }, py::arg("network"), py::arg("scheme"), py::arg("hw"),
     "Cycle count; hw is a preset name or a config path.");
  m.def("profile_json", [](const std::string& hw, const std::vector<int>& bits) {
    return to_json(run_kernel_benchmarks(hw_from(hw), BenchmarkPlan::default_plan(),
                                         BitwidthSet::from(bits)))
        .dump();
  }, py::arg("hw"), py::arg("bits"));
  m.def("fit_proxy_json", [](const std::string& profile, const std::string& kind,
                             std::uint64_t seed) {
    FitOptions opt;
    opt.seed = seed;
    opt.forest.seed = seed;
    return fit_proxy(profile_from_json(json::parse(profile)), proxy_kind_from_string(kind), opt)
        .to_json()
        .dump();
  }, py::arg("profile"), py::arg("kind"), py::arg("seed") = 0);
  m.def("predict_latency", [](const std::string& proxy, const NetworkIR& net, const PairList& s) {
    return predict_latency(ProxyModel::from_json(json::parse(proxy)), net, to_scheme(s));
  }, py::arg("proxy"), py::arg("network"), py::arg("scheme"));

  m.def("oracle_accuracy", [](std::size_t layers, std::uint64_t seed, const PairList& s) {
    return SyntheticOracle::make(layers, seed).accuracy(to_scheme(s));
  }, py::arg("num_layers"), py::arg("seed"), py::arg("scheme"));

  m.def("explore_oracle_json", [](const NetworkIR& net, double ratio, int budget,
                                  std::uint64_t seed, const std::vector<int>& bits,
                                  const std::string& proxy, std::uint64_t oracle_seed) {
    SearchConfig cfg;
    cfg.ratio = ratio;
    cfg.budget = budget;
    cfg.seed = seed;
    cfg.sampler.bitwidths = BitwidthSet::from(bits);
    const auto cost = cost_table(net, cfg.sampler.bitwidths, proxy);
    const auto oracle = SyntheticOracle::make(net.size(), oracle_seed);
    SearchResult r;
    {
      py::gil_scoped_release release;
      r = explore(cost, cfg, [&](const QuantScheme& s) { return oracle.accuracy(s); });
    }
    return to_json(r, cfg).dump();
  }, py::arg("network"), py::arg("ratio"), py::arg("budget") = 48, py::arg("seed") = 0,
     py::arg("bits") = std::vector<int>{1, 2, 4, 8}, py::arg("proxy") = "",
     py::arg("oracle_seed") = 0);

  m.def("explore_json", [](const NetworkIR& net, py::function evaluate, double ratio, int budget,
                           std::uint64_t seed, const std::vector<int>& bits,
                           const std::string& proxy) {
    SearchConfig cfg;
    cfg.ratio = ratio;
    cfg.budget = budget;
    cfg.seed = seed;
    cfg.sampler.bitwidths = BitwidthSet::from(bits);
    const auto cost = cost_table(net, cfg.sampler.bitwidths, proxy);
    const auto r = explore(cost, cfg, [&](const QuantScheme& s) {
      return evaluate(from_scheme(s)).cast<double>();
    });
    return to_json(r, cfg).dump();
  }, py::arg("network"), py::arg("evaluate"), py::arg("ratio"), py::arg("budget") = 48,
     py::arg("seed") = 0, py::arg("bits") = std::vector<int>{1, 2, 4, 8}, py::arg("proxy") = "");

  py::class_<TinyMlpFixture>(m, "TinyMlp")
      .def_readonly("network", &TinyMlpFixture::net)
      .def_property_readonly("test_count", [](const TinyMlpFixture& f) { return f.data.test_count(); })
      .def("ptq_accuracy", [](const TinyMlpFixture& f, const PairList& s) {
        return ptq_evaluate(f.net, to_scheme(s), f.data);
      }, py::arg("scheme"))
      .def("qat_accuracy", [](const TinyMlpFixture& f, const PairList& s, bool final_budget,
                              std::uint64_t seed) {
        py::gil_scoped_release release;
        return qat_evaluate(f.net, to_scheme(s), f.data, f.train,
                            final_budget ? QatBudget::kFinal : QatBudget::kShort, seed);
      }, py::arg("scheme"), py::arg("final") = false, py::arg("seed") = 0)
      .def("logits", [](const TinyMlpFixture& f, const PairList& s, std::size_t index) {
        const auto feats = static_cast<std::size_t>(f.data.features);
        if (index >= f.data.test_count()) throw ValidationError("test index out of range");
        const std::span<const float> x(f.data.test_x.data() + index * feats, feats);
        return run_integer(f.net, quantize_model(f.net, to_scheme(s)), x);
      }, py::arg("scheme"), py::arg("index"));
  m.def("tiny_mlp", &make_tiny_mlp, py::arg("seed") = 7);

  m.def("codegen", [](const NetworkIR& net, const PairList& s, const std::filesystem::path& out) {
    std::vector<std::string> names;
    for (const auto& f : emit_source(build_plan(net, to_scheme(s)), out)) names.push_back(f.name);
    return names;
  }, py::arg("network"), py::arg("scheme"), py::arg("out_dir"));
}
