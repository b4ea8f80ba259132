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

#include "mixq/model_ir.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixq/container.hpp"
#include "mixq/error.hpp"

namespace mixq {

using nlohmann::json;

namespace {

std::int64_t product(const std::vector<std::int64_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1},
                         std::multiplies<>());
}

std::string layer_tag(const LayerDesc& l) {
  return "layer " + std::to_string(l.index);
}

}  // namespace

const char* to_string(LayerKind kind) {
  return kind == LayerKind::kConv2D ? "Conv2D" : "Linear";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "Conv2D") return LayerKind::kConv2D;
  if (s == "Linear") return LayerKind::kLinear;
  throw ValidationError("unsupported layer kind '" + s + "'");
}

std::int64_t LayerDesc::rows() const {
  if (kind == LayerKind::kConv2D) return out_shape[1] * out_shape[2];
  return in_shape.size() == 2 ? in_shape[0] : 1;
}

std::int64_t LayerDesc::reduction() const {
  if (kind == LayerKind::kConv2D) return in_shape[0] * kernel_h * kernel_w;
  return in_shape.back();
}

std::int64_t LayerDesc::out_channels() const {
  return kind == LayerKind::kConv2D ? out_shape[0] : out_shape.back();
}

std::int64_t LayerDesc::output_count() const { return product(out_shape); }

std::vector<std::int64_t> LayerDesc::weight_shape() const {
  if (kind == LayerKind::kConv2D) {
    return {out_shape[0], in_shape[0], kernel_h, kernel_w};
  }
  return {out_shape.back(), in_shape.back()};
}

void finalize_layer(LayerDesc& l) {
  auto positive = [&](const std::vector<std::int64_t>& v) {
    return !v.empty() &&
           std::all_of(v.begin(), v.end(), [](auto d) { return d > 0; });
  };
  if (!positive(l.in_shape) || !positive(l.out_shape)) {
    throw ValidationError(layer_tag(l) + ": shapes must be non-empty and positive");
  }
  if (l.kind == LayerKind::kLinear) {
    if (l.in_shape.size() > 2 || l.out_shape.size() != l.in_shape.size()) {
      throw ValidationError(layer_tag(l) + ": Linear shapes must be [F] or [rows, F]");
    }
    if (l.in_shape.size() == 2 && l.in_shape[0] != l.out_shape[0]) {
      throw ValidationError(layer_tag(l) + ": Linear row count mismatch");
    }
  } else {
    if (l.in_shape.size() != 3 || l.out_shape.size() != 3) {
      throw ValidationError(layer_tag(l) + ": Conv2D shapes must be [C, H, W]");
    }
    if (l.kernel_h <= 0 || l.kernel_w <= 0 || l.stride <= 0 || l.pad < 0) {
      throw ValidationError(layer_tag(l) + ": bad Conv2D kernel/stride/pad");
    }
    const auto oh = (l.in_shape[1] + 2 * l.pad - l.kernel_h) / l.stride + 1;
    const auto ow = (l.in_shape[2] + 2 * l.pad - l.kernel_w) / l.stride + 1;
    if (l.in_shape[1] + 2 * l.pad < l.kernel_h ||
        l.in_shape[2] + 2 * l.pad < l.kernel_w || oh != l.out_shape[1] ||
        ow != l.out_shape[2]) {
      throw ValidationError(layer_tag(l) + ": Conv2D output shape inconsistent with input/kernel");
    }
  }
  l.macs = l.rows() * l.reduction() * l.out_channels();
  l.weight_count = product(l.weight_shape());
  l.activation_count = product(l.in_shape);
}

LayerDesc make_linear(std::int64_t in_features, std::int64_t out_features,
                      std::int64_t rows, Activation act) {
  LayerDesc l;
  l.kind = LayerKind::kLinear;
  l.activation = act;
  if (rows > 0) {
    l.in_shape = {rows, in_features};
    l.out_shape = {rows, out_features};
  } else {
    l.in_shape = {in_features};
    l.out_shape = {out_features};
  }
  finalize_layer(l);
  return l;
}

LayerDesc make_conv2d(std::int64_t in_ch, std::int64_t in_h, std::int64_t in_w,
                      std::int64_t out_ch, std::int64_t kernel,
                      std::int64_t stride, std::int64_t pad, Activation act) {
  LayerDesc l;
  l.kind = LayerKind::kConv2D;
  l.activation = act;
  l.kernel_h = l.kernel_w = kernel;
  l.stride = stride;
  l.pad = pad;
  l.in_shape = {in_ch, in_h, in_w};
  if (stride <= 0 || in_h + 2 * pad < kernel || in_w + 2 * pad < kernel) {
    throw ValidationError("make_conv2d: kernel larger than padded input");
  }
  l.out_shape = {out_ch, (in_h + 2 * pad - kernel) / stride + 1,
                 (in_w + 2 * pad - kernel) / stride + 1};
  finalize_layer(l);
  return l;
}

std::int64_t Tensor::numel() const { return product(dims); }

std::int64_t NetworkIR::total_macs() const {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.macs;
  return total;
}

void validate_network(const NetworkIR& net) {
  if (net.layers.empty()) throw ValidationError("network has no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.index != i) throw ValidationError("layer indices must be 0..L-1 in order");
    if (l.macs <= 0) throw ValidationError(layer_tag(l) + ": macs must be positive");
    if (i + 1 < net.layers.size() &&
        l.output_count() != product(net.layers[i + 1].in_shape)) {
      throw ValidationError(layer_tag(l) +
                            ": output does not feed the next layer's input");
    }
  }
  if (!net.has_weights()) return;
  if (net.weights.layers.size() != net.layers.size()) {
    throw ValidationError("weight store layer count mismatch");
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const auto& w = net.weights.layers[i];
    if (w.weight.dims != l.weight_shape() ||
        static_cast<std::int64_t>(w.weight.data.size()) != l.weight_count) {
      throw ValidationError(layer_tag(l) + ": weight tensor shape mismatch");
    }
    if (w.bias.dims != std::vector<std::int64_t>{l.out_channels()} ||
        static_cast<std::int64_t>(w.bias.data.size()) != l.out_channels()) {
      throw ValidationError(layer_tag(l) + ": bias tensor shape mismatch");
    }
  }
}

namespace {

std::vector<std::int64_t> int_list(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw FormatError(std::string("layer missing array field '") + key + "'");
  }
  return j[key].get<std::vector<std::int64_t>>();
}

WeightStore load_weights(const std::filesystem::path& path,
                         const std::vector<LayerDesc>& layers) {
  WeightStore store;
  store.layers.resize(layers.size());
  std::vector<int> seen(layers.size() * 2, 0);
  for (auto& rec : read_container(path)) {
    if (rec.role != Role::kWeight && rec.role != Role::kBias) continue;
    if (rec.layer >= layers.size()) {
      throw FormatError("weights: record for unknown layer " +
                        std::to_string(rec.layer));
    }
    Tensor t;
    t.dims.assign(rec.dims.begin(), rec.dims.end());
    t.data = rec.floats();
    const int slot = rec.role == Role::kWeight ? 0 : 1;
    seen[rec.layer * 2 + slot] += 1;
    if (slot == 0) {
      store.layers[rec.layer].weight = std::move(t);
    } else {
      store.layers[rec.layer].bias = std::move(t);
    }
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw FormatError("weights: every layer needs exactly one weight and one bias tensor");
  }
  return store;
}

}  // namespace

NetworkIR load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed network JSON: " + std::string(e.what()));
  }
  NetworkIR net;
  try {
    net.name = j.value("name", std::string{});
    net.float_accuracy = j.value("float_accuracy", 0.0);
    net.dataset = j.value("dataset", std::string{});
    if (!j.contains("layers") || !j["layers"].is_array()) {
      throw FormatError("network JSON needs a 'layers' array");
    }
    std::size_t index = 0;
    for (const auto& jl : j["layers"]) {
      if (jl.contains("inputs")) {
        const auto inputs = jl["inputs"].get<std::vector<std::int64_t>>();
        const bool chained =
            index > 0 && inputs == std::vector<std::int64_t>{
                                       static_cast<std::int64_t>(index) - 1};
        if (!chained) {
          throw ValidationError("layer " + std::to_string(index) +
                                ": only sequential networks are supported");
        }
      }
      LayerDesc l;
      l.index = index++;
      l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
      const auto act = jl.value("activation", std::string("none"));
      if (act == "relu") {
        l.activation = Activation::kRelu;
      } else if (act != "none") {
        throw ValidationError("unsupported activation '" + act + "'");
      }
      l.in_shape = int_list(jl, "in_shape");
      l.out_shape = int_list(jl, "out_shape");
      if (l.kind == LayerKind::kConv2D) {
        const auto& k = jl.at("kernel");
        if (k.is_array()) {
          const auto kv = k.get<std::vector<std::int64_t>>();
          if (kv.size() != 2) throw FormatError("kernel must be [kh, kw]");
          l.kernel_h = kv[0];
          l.kernel_w = kv[1];
        } else {
          l.kernel_h = l.kernel_w = k.get<std::int64_t>();
        }
        l.stride = jl.value("stride", std::int64_t{1});
        l.pad = jl.value("pad", std::int64_t{0});
      }
      finalize_layer(l);
      if (jl.contains("macs") && jl["macs"].get<std::int64_t>() != l.macs) {
        throw ValidationError("layer " + std::to_string(l.index) +
                              ": stored macs disagree with shapes (stored " +
                              std::to_string(jl["macs"].get<std::int64_t>()) +
                              ", computed " + std::to_string(l.macs) + ")");
      }
      net.layers.push_back(std::move(l));
    }
    if (j.contains("weights_file") && !j["weights_file"].is_null()) {
      const auto wpath =
          path.parent_path() / j["weights_file"].get<std::string>();
      net.weights = load_weights(wpath, net.layers);
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed network JSON: " + std::string(e.what()));
  }
  validate_network(net);
  return net;
}

void save_network(const NetworkIR& net, const std::filesystem::path& path) {
  validate_network(net);
  json j;
  j["name"] = net.name;
  j["float_accuracy"] = net.float_accuracy;
  if (!net.dataset.empty()) j["dataset"] = net.dataset;
  j["layers"] = json::array();
  for (const auto& l : net.layers) {
    json jl;
    jl["kind"] = to_string(l.kind);
    jl["in_shape"] = l.in_shape;
    jl["out_shape"] = l.out_shape;
    if (l.kind == LayerKind::kConv2D) {
      jl["kernel"] = {l.kernel_h, l.kernel_w};
      jl["stride"] = l.stride;
      jl["pad"] = l.pad;
    }
    jl["activation"] = l.activation == Activation::kRelu ? "relu" : "none";
    jl["macs"] = l.macs;
    j["layers"].push_back(std::move(jl));
  }
  if (net.has_weights()) {
    const auto wname = path.stem().string() + ".weights.bin";
    j["weights_file"] = wname;
    std::vector<TensorRecord> recs;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const auto& lw = net.weights.layers[i];
      auto dims32 = [](const Tensor& t) {
        return std::vector<std::uint32_t>(t.dims.begin(), t.dims.end());
      };
      recs.push_back(TensorRecord::from_floats(static_cast<std::uint32_t>(i),
                                               Role::kWeight, dims32(lw.weight),
                                               lw.weight.data));
      recs.push_back(TensorRecord::from_floats(static_cast<std::uint32_t>(i),
                                               Role::kBias, dims32(lw.bias),
                                               lw.bias.data));
    }
    write_container(path.parent_path() / wname, recs);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

BitwidthSet BitwidthSet::ptq() { return {{4, 5, 6, 7, 8}}; }
BitwidthSet BitwidthSet::qat() { return {{1, 2, 4, 8}}; }

BitwidthSet BitwidthSet::from(std::vector<int> bits) {
  std::sort(bits.begin(), bits.end());
  bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
  if (bits.empty()) throw ValidationError("bitwidth set is empty");
  if (bits.front() < 1 || bits.back() > 8) {
    throw ValidationError("bitwidths must lie in [1, 8]");
  }
  return {std::move(bits)};
}

bool BitwidthSet::contains(int b) const {
  return std::binary_search(bits.begin(), bits.end(), b);
}

std::vector<LayerBits> BitwidthSet::pairs() const {
  std::vector<LayerBits> out;
  for (int w : bits) {
    for (int a : bits) out.push_back({w, a});
  }
  return out;
}

std::string QuantScheme::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) os << ' ';
    os << 'W' << pairs[i].w << 'A' << pairs[i].a;
  }
  return os.str();
}

void validate_scheme(const QuantScheme& scheme, std::size_t num_layers,
                     const BitwidthSet& set) {
  if (scheme.size() != num_layers) {
    throw ValidationError("scheme has " + std::to_string(scheme.size()) +
                          " pairs, network has " + std::to_string(num_layers) +
                          " layers");
  }
  for (const auto& p : scheme.pairs) {
    if (!set.contains(p.w) || !set.contains(p.a)) {
      throw ValidationError("bitwidth pair W" + std::to_string(p.w) + "A" +
                            std::to_string(p.a) + " not in configured set");
    }
  }
}

void validate_scheme(const QuantScheme& scheme, const NetworkIR& net) {
  validate_scheme(scheme, net.size(), BitwidthSet{{1, 2, 3, 4, 5, 6, 7, 8}});
}

QuantScheme scheme_uniform(const NetworkIR& net, int bits,
                           const BitwidthSet& set) {
  if (net.layers.empty()) throw ValidationError("empty network");
  if (!set.contains(bits)) {
    throw ValidationError("bitwidth " + std::to_string(bits) +
                          " not in configured set");
  }
  return {std::vector<LayerBits>(net.size(), LayerBits{bits, bits})};
}

}  // namespace mixq
