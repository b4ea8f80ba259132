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


#include "mixq/codegen.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mixq/error.hpp"
#include "mixq/kernels.hpp"
#include "mixq/quant.hpp"

namespace mixq {
namespace {

constexpr char kRuntimeHeader[] =
#include "runtime_header.inc"
    ;

constexpr std::size_t kContainerHeaderBytes = 12;

std::size_t align_up(std::size_t n) { return round_up(n, kArenaAlignment); }

bool overlaps(const DeployBuffer& a, const DeployBuffer& b) {
  return a.first <= b.last && b.first <= a.last;
}

std::size_t record_header_bytes(const TensorRecord& r) {
  const bool extra = r.role == Role::kPackedWeight || r.role == Role::kIntBias;
  return 4 + 1 + 1 + 4 * r.dims.size() + (extra ? 5 : 0);
}

std::vector<std::uint8_t> words_to_bytes(std::span<const std::uint32_t> words) {
  std::vector<std::uint8_t> out(words.size() * 4);
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<std::uint8_t>(words[i] >> (8 * b));
  }
  return out;
}

std::string bits_label(LayerBits b) {
  return "W" + std::to_string(b.w) + "A" + std::to_string(b.a);
}

// Typed access to the arena by memcpy, as the generated code would cast.
class Arena {
 public:
  explicit Arena(std::size_t bytes) : bytes_(bytes, 0) {}

  template <typename T>
  void write(const DeployBuffer& buf, std::span<const T> values) {
    if (values.size() * sizeof(T) > buf.bytes) {
      throw Error("arena overflow writing " + buf.name);
    }
    std::memcpy(bytes_.data() + buf.offset, values.data(), values.size() * sizeof(T));
  }
  template <typename T>
  std::vector<T> read(const DeployBuffer& buf, std::size_t count) const {
    if (count * sizeof(T) > buf.bytes) throw Error("arena overflow reading " + buf.name);
    std::vector<T> out(count);
    std::memcpy(out.data(), bytes_.data() + buf.offset, count * sizeof(T));
    return out;
  }
  void copy_in(const DeployBuffer& buf, std::span<const std::uint8_t> src) {
    if (src.size() > buf.bytes) throw Error("arena overflow copying " + buf.name);
    std::memcpy(bytes_.data() + buf.offset, src.data(), src.size());
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

}  // namespace

std::string fnv1a64_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string runtime_header() { return kRuntimeHeader; }

std::size_t allocate_arena(std::vector<DeployBuffer>& buffers) {
  std::vector<std::size_t> order(buffers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return buffers[a].bytes > buffers[b].bytes;
  });
  std::vector<std::size_t> placed;
  std::size_t arena = 0;
  for (auto i : order) {
    auto& buf = buffers[i];
    std::vector<const DeployBuffer*> live;
    for (auto j : placed) {
      if (overlaps(buf, buffers[j])) live.push_back(&buffers[j]);
    }
    std::sort(live.begin(), live.end(),
              [](const DeployBuffer* a, const DeployBuffer* b) { return a->offset < b->offset; });
    std::size_t offset = 0;
    for (const auto* other : live) {
      if (offset + buf.bytes <= other->offset) break;
      offset = std::max(offset, align_up(other->offset + other->bytes));
    }
    buf.offset = offset;
    arena = std::max(arena, align_up(offset + buf.bytes));
    placed.push_back(i);
  }
  return arena;
}

DeployPlan build_plan(const NetworkIR& net, const QuantScheme& scheme) {
  return build_plan(net, quantize_model(net, scheme));
}

DeployPlan build_plan(const NetworkIR& net, const QuantizedModel& model) {
  validate_network(net);
  if (net.layers.empty()) throw ValidationError("cannot plan an empty network");
  if (model.layers.size() != net.layers.size()) {
    throw ValidationError("quantized model does not match network");
  }
  DeployPlan plan;
  plan.network = net.name;
  plan.scheme = model.scheme;
  plan.input_shape = net.layers.front().in_shape;
  plan.input_count = net.layers.front().activation_count;
  plan.output_count = net.layers.back().output_count();

  const int last = static_cast<int>(net.layers.size()) - 1;
  auto add = [&](std::string name, std::size_t bytes, int first, int end) {
    plan.buffers.push_back({std::move(name), std::max<std::size_t>(bytes, 4), first, end, 0});
    return static_cast<int>(plan.buffers.size()) - 1;
  };
  int prev_out = add("input", static_cast<std::size_t>(plan.input_count) * 4, 0, 0);

  std::size_t file_pos = kContainerHeaderBytes;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const auto& ql = model.layers[i];
    const int t = static_cast<int>(i);
    KernelCall call;
    call.layer = i;
    call.kind = layer.kind;
    call.activation = layer.activation;
    call.scheme_bits = ql.bits;
    call.bits = {compute_bits(ql.bits.w), compute_bits(ql.bits.a)};
    if (!(call.bits == call.scheme_bits)) {
      plan.notes.push_back("layer " + std::to_string(i) + ": " + bits_label(call.scheme_bits) +
                           " quantized at its own width, widened to " +
                           bits_label(call.bits) + " for the kernel");
    }
    call.m = layer.rows();
    call.k = layer.reduction();
    call.n = layer.out_channels();
    const auto op = op_for(call.bits.a, call.bits.w);
    call.padded_k = static_cast<std::int64_t>(
        round_up(std::max<std::size_t>(static_cast<std::size_t>(call.k), 1), op.lanes()));
    if (layer.kind == LayerKind::kConv2D) {
      call.c = layer.in_shape[0];
      call.h = layer.in_shape[1];
      call.w = layer.in_shape[2];
      call.kh = layer.kernel_h;
      call.kw = layer.kernel_w;
      call.stride = layer.stride;
      call.pad = layer.pad;
    }
    call.weight_scale = ql.weight_q.scale;

    const auto padded = static_cast<std::size_t>(call.padded_k);
    const auto pw = pack_rows(ql.weight, call.bits.w, padded);
    TensorRecord wrec;
    wrec.layer = static_cast<std::uint32_t>(i);
    wrec.role = Role::kPackedWeight;
    wrec.dims = {static_cast<std::uint32_t>(call.n), static_cast<std::uint32_t>(padded)};
    wrec.bits = static_cast<std::uint8_t>(call.bits.w);
    wrec.scale = ql.weight_q.scale;
    wrec.payload = words_to_bytes(pw.words);
    auto brec = TensorRecord::from_floats(static_cast<std::uint32_t>(i), Role::kBias,
                                          {static_cast<std::uint32_t>(call.n)}, ql.bias);
    call.weight_offset = file_pos + record_header_bytes(wrec);
    file_pos = call.weight_offset + wrec.payload.size();
    file_pos += record_header_bytes(brec) + brec.payload.size();
    const auto weight_bytes = wrec.payload.size();
    const auto bias_bytes = brec.payload.size();
    plan.weights.push_back(std::move(wrec));
    plan.weights.push_back(std::move(brec));

    const auto m = static_cast<std::size_t>(call.m);
    const auto n = static_cast<std::size_t>(call.n);
    const auto k = static_cast<std::size_t>(call.k);
    const std::string p = "l" + std::to_string(i) + "_";
    auto& b = call.buffers;
    b.input = prev_out;
    b.qact = add(p + "q", static_cast<std::size_t>(layer.activation_count) * 4, t, t);
    if (layer.kind == LayerKind::kConv2D) b.patches = add(p + "patches", m * k * 4, t, t);
    const std::size_t act_words = (padded * static_cast<std::size_t>(call.bits.a) + 31) / 32;
    b.packed = add(p + "packed", m * act_words * 4, t, t);
    add(p + "weight", weight_bytes, t, t);
    add(p + "bias", bias_bytes, t, t);
    b.acc = add(p + "acc", m * n * 4, t, t);
    if (t < last) {
      b.output = add(p + "out", m * n * 4, t, t + 1);
      prev_out = b.output;
    }
    plan.calls.push_back(std::move(call));
  }
  plan.arena_bytes = allocate_arena(plan.buffers);
  validate_plan(plan);
  return plan;
}

namespace {

const DeployBuffer& buffer_named(const DeployPlan& plan, const std::string& name) {
  for (const auto& b : plan.buffers) {
    if (b.name == name) return b;
  }
  throw ValidationError("plan has no buffer '" + name + "'");
}

}  // namespace

void validate_plan(const DeployPlan& plan) {
  if (plan.calls.empty()) throw ValidationError("deployment plan has no kernel calls");
  for (std::size_t i = 0; i < plan.buffers.size(); ++i) {
    const auto& a = plan.buffers[i];
    if (a.offset % kArenaAlignment != 0 || a.offset + a.bytes > plan.arena_bytes) {
      throw ValidationError("buffer " + a.name + " lies outside the arena");
    }
    for (std::size_t j = i + 1; j < plan.buffers.size(); ++j) {
      const auto& b = plan.buffers[j];
      if (overlaps(a, b) && a.offset < b.offset + b.bytes && b.offset < a.offset + a.bytes) {
        throw ValidationError("live buffers " + a.name + " and " + b.name + " overlap");
      }
    }
  }
  const auto nb = static_cast<int>(plan.buffers.size());
  for (std::size_t i = 0; i < plan.calls.size(); ++i) {
    const auto& c = plan.calls[i];
    if (!packable_bits(c.bits.w) || !packable_bits(c.bits.a)) {
      throw ValidationError("layer " + std::to_string(i) + " executes at unsupported width " +
                            bits_label(c.bits));
    }
    for (int id : {c.buffers.input, c.buffers.qact, c.buffers.packed, c.buffers.acc}) {
      if (id < 0 || id >= nb) throw ValidationError("call " + std::to_string(i) + " misses a buffer");
    }
    if (i > 0 && plan.calls[i - 1].buffers.output != c.buffers.input) {
      throw ValidationError("call " + std::to_string(i) + " does not consume its predecessor");
    }
  }
  if (plan.weights.size() != 2 * plan.calls.size()) {
    throw ValidationError("plan weights do not match its calls");
  }
}

std::vector<std::int32_t> run_plan(const DeployPlan& plan,
                                   std::span<const std::uint8_t> weights_bin,
                                   std::span<const float> input) {
  validate_plan(plan);
  if (static_cast<std::int64_t>(input.size()) != plan.input_count) {
    throw ValidationError("input has " + std::to_string(input.size()) + " values, expected " +
                          std::to_string(plan.input_count));
  }
  const auto records = decode_container(weights_bin);
  auto find = [&](std::size_t layer, Role role) -> const TensorRecord& {
    for (const auto& r : records) {
      if (r.layer == layer && r.role == role) return r;
    }
    throw FormatError("weights binary lacks layer " + std::to_string(layer) + " role " +
                      std::to_string(static_cast<int>(role)));
  };

  Arena arena(plan.arena_bytes);
  arena.write(plan.buffers[static_cast<std::size_t>(plan.calls[0].buffers.input)], input);
  std::vector<std::int32_t> logits;
  for (const auto& c : plan.calls) {
    const auto& bufs = plan.buffers;
    const auto& b = c.buffers;
    const std::string p = "l" + std::to_string(c.layer) + "_";
    const auto m = static_cast<std::size_t>(c.m);
    const auto n = static_cast<std::size_t>(c.n);
    const auto k = static_cast<std::size_t>(c.k);
    const auto padded = static_cast<std::size_t>(c.padded_k);
    const std::size_t in_count = c.kind == LayerKind::kConv2D
                                     ? static_cast<std::size_t>(c.c * c.h * c.w)
                                     : m * k;

    const auto& wrec = find(c.layer, Role::kPackedWeight);
    const auto& brec = find(c.layer, Role::kBias);
    if (c.weight_offset + wrec.payload.size() > weights_bin.size() ||
        !std::equal(wrec.payload.begin(), wrec.payload.end(),
                    weights_bin.begin() + static_cast<std::ptrdiff_t>(c.weight_offset))) {
      throw FormatError("packed weight offset of layer " + std::to_string(c.layer) + " is stale");
    }
    if (wrec.bits != c.bits.w || wrec.dims.size() != 2 || wrec.dims[0] != n ||
        wrec.dims[1] != padded) {
      throw FormatError("packed weight header of layer " + std::to_string(c.layer) +
                        " does not match the plan");
    }
    const auto& wbuf = buffer_named(plan, p + "weight");
    const auto& bbuf = buffer_named(plan, p + "bias");
    arena.copy_in(wbuf, wrec.payload);
    arena.copy_in(bbuf, brec.payload);

    const auto x = arena.read<float>(bufs[static_cast<std::size_t>(b.input)], in_count);
    const auto act_q = compute_scale(x, c.scheme_bits.a);
    arena.write<std::int32_t>(bufs[static_cast<std::size_t>(b.qact)], quantize(x, act_q));

    IntMatrix act(m, k);
    if (c.kind == LayerKind::kConv2D) {
      const auto q = arena.read<std::int32_t>(bufs[static_cast<std::size_t>(b.qact)], in_count);
      const auto desc = make_conv2d(c.c, c.h, c.w, c.n, c.kh, c.stride, c.pad);
      const auto patches = im2col(q, desc, im2col_pad_value(c.bits.a));
      arena.write<std::int32_t>(bufs[static_cast<std::size_t>(b.patches)], patches.data);
      act.data = arena.read<std::int32_t>(bufs[static_cast<std::size_t>(b.patches)], m * k);
    } else {
      act.data = arena.read<std::int32_t>(bufs[static_cast<std::size_t>(b.qact)], m * k);
    }
    const auto pa = pack_rows(act, c.bits.a, padded);
    arena.write<std::uint32_t>(bufs[static_cast<std::size_t>(b.packed)], pa.words);

    PackedMatrix act_p = pa;
    act_p.words = arena.read<std::uint32_t>(bufs[static_cast<std::size_t>(b.packed)], pa.words.size());
    PackedMatrix w_p;
    w_p.rows = n;
    w_p.cols = k;
    w_p.padded_cols = padded;
    w_p.bits = c.bits.w;
    w_p.row_words = (padded * static_cast<std::size_t>(c.bits.w) + 31) / 32;
    w_p.words = arena.read<std::uint32_t>(wbuf, n * w_p.row_words);
    const auto prod = matmul_packed(act_p, w_p);

    const bool channel_major = c.kind == LayerKind::kConv2D;
    std::vector<std::int32_t> acc(m * n);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t o = 0; o < n; ++o) {
        acc[channel_major ? o * m + r : r * n + o] = prod.at(r, o);
      }
    }
    const auto bias = arena.read<float>(bbuf, n);
    const float acc_scale = wrec.scale * act_q.scale;
    const auto qb = quantize_bias(bias, acc_scale);
    for (std::size_t j = 0; j < acc.size(); ++j) {
      const std::size_t ch = channel_major ? j / m : j % n;
      const std::int64_t v = static_cast<std::int64_t>(acc[j]) + qb[ch];
      if (v > INT32_MAX || v < INT32_MIN) {
        throw OverflowError("bias add overflows int32 in layer " + std::to_string(c.layer));
      }
      acc[j] = static_cast<std::int32_t>(v);
    }
    const auto& accbuf = bufs[static_cast<std::size_t>(b.acc)];
    arena.write<std::int32_t>(accbuf, acc);
    if (b.output >= 0) {
      std::vector<float> y(acc.size());
      for (std::size_t j = 0; j < acc.size(); ++j) {
        float v = static_cast<float>(acc[j]) * acc_scale;
        if (c.activation == Activation::kRelu) v = std::max(v, 0.0f);
        y[j] = v;
      }
      arena.write<float>(bufs[static_cast<std::size_t>(b.output)], y);
    } else {
      logits = arena.read<std::int32_t>(accbuf, acc.size());
    }
  }
  return logits;
}

nlohmann::json to_json(const DeployPlan& plan) {
  nlohmann::json calls = nlohmann::json::array();
  for (const auto& c : plan.calls) {
    nlohmann::json j = {{"layer", c.layer},
                        {"kind", to_string(c.kind)},
                        {"relu", c.activation == Activation::kRelu},
                        {"scheme_bits", {c.scheme_bits.w, c.scheme_bits.a}},
                        {"bits", {c.bits.w, c.bits.a}},
                        {"m", c.m},
                        {"k", c.k},
                        {"n", c.n},
                        {"padded_k", c.padded_k},
                        {"weight_scale", c.weight_scale},
                        {"weight_offset", c.weight_offset},
                        {"buffers",
                         {{"input", c.buffers.input},
                          {"qact", c.buffers.qact},
                          {"patches", c.buffers.patches},
                          {"packed", c.buffers.packed},
                          {"acc", c.buffers.acc},
                          {"output", c.buffers.output}}}};
    if (c.kind == LayerKind::kConv2D) {
      j["conv"] = {{"c", c.c}, {"h", c.h},           {"w", c.w},    {"kh", c.kh},
                   {"kw", c.kw}, {"stride", c.stride}, {"pad", c.pad}};
    }
    calls.push_back(std::move(j));
  }
  nlohmann::json buffers = nlohmann::json::array();
  for (const auto& b : plan.buffers) {
    buffers.push_back({{"name", b.name},
                       {"bytes", b.bytes},
                       {"first", b.first},
                       {"last", b.last},
                       {"offset", b.offset}});
  }
  nlohmann::json scheme = nlohmann::json::array();
  for (const auto& p : plan.scheme.pairs) scheme.push_back({p.w, p.a});
  return {{"network", plan.network},
          {"scheme", scheme},
          {"input_shape", plan.input_shape},
          {"output_count", plan.output_count},
          {"arena_bytes", plan.arena_bytes},
          {"calls", calls},
          {"buffers", buffers},
          {"notes", plan.notes}};
}

void write_input_tensor(const std::filesystem::path& path,
                        std::span<const std::int64_t> shape,
                        std::span<const float> values) {
  std::vector<std::uint32_t> dims;
  std::int64_t count = 1;
  for (auto d : shape) {
    dims.push_back(static_cast<std::uint32_t>(d));
    count *= d;
  }
  if (count != static_cast<std::int64_t>(values.size())) {
    throw ValidationError("input tensor shape does not match its values");
  }
  const std::vector<TensorRecord> recs = {
      TensorRecord::from_floats(0, Role::kInput, dims, values)};
  write_container(path, recs);
}

namespace {

std::string model_h(const DeployPlan& plan, std::size_t weights_bytes, std::size_t input_file_bytes) {
  std::ostringstream os;
  os << "/* Generated by mixq for network '" << plan.network << "'. */\n"
     << "#ifndef MIXQ_MODEL_H_\n#define MIXQ_MODEL_H_\n\n"
     << "#include \"mixq_rt.h\"\n\n"
     << "#define MIXQ_MODEL_INPUT_COUNT " << plan.input_count << "u\n"
     << "#define MIXQ_MODEL_OUTPUT_COUNT " << plan.output_count << "u\n"
     << "#define MIXQ_MODEL_ARENA_BYTES " << plan.arena_bytes << "u\n"
     << "#define MIXQ_MODEL_WEIGHTS_BYTES " << weights_bytes << "u\n"
     << "#define MIXQ_MODEL_INPUT_FILE_BYTES " << input_file_bytes << "u\n\n"
     << "/* Runs one inference and writes the final integer accumulators. */\n"
     << "mixq_rt_status mixq_model_run(const mixq_rt_container* weights,\n"
     << "                              const float* input, int32_t* logits);\n\n"
     << "#endif /* MIXQ_MODEL_H_ */\n";
  return os.str();
}

std::string ptr(const DeployPlan& plan, int id, const char* type) {
  const auto& b = plan.buffers[static_cast<std::size_t>(id)];
  std::ostringstream os;
  os << "(" << type << "*)(mixq_arena + " << b.offset << "u) /* " << b.name << " */";
  return os.str();
}

std::string model_c(const DeployPlan& plan) {
  std::ostringstream os;
  os << "/* Generated by mixq for network '" << plan.network << "', scheme "
     << plan.scheme.to_string() << ". */\n"
     << "#include \"model.h\"\n\n"
     << "#define MIXQ_CHECK(expr) do { mixq_rt_status s_ = (expr); if (s_ != MIXQ_RT_OK) return s_; } while (0)\n\n"
     << "static _Alignas(16) uint8_t mixq_arena[MIXQ_MODEL_ARENA_BYTES];\n\n"
     << "mixq_rt_status mixq_model_run(const mixq_rt_container* weights,\n"
     << "                              const float* input, int32_t* logits) {\n"
     << "  mixq_rt_record wrec, brec;\n"
     << "  float sa;\n"
     << "  size_t i;\n"
     << "  {\n"
     << "    float* x = " << ptr(plan, plan.calls[0].buffers.input, "float") << ";\n"
     << "    for (i = 0; i < MIXQ_MODEL_INPUT_COUNT; ++i) x[i] = input[i];\n"
     << "  }\n";
  for (const auto& c : plan.calls) {
    const auto& b = c.buffers;
    const std::string p = "l" + std::to_string(c.layer) + "_";
    const auto& wbuf = buffer_named(plan, p + "weight");
    const auto& bbuf = buffer_named(plan, p + "bias");
    const bool conv = c.kind == LayerKind::kConv2D;
    const std::int64_t in_count = conv ? c.c * c.h * c.w : c.m * c.k;
    os << "  /* layer " << c.layer << ": " << to_string(c.kind) << " " << bits_label(c.scheme_bits);
    if (!(c.bits == c.scheme_bits)) os << " executed as " << bits_label(c.bits);
    os << ", M=" << c.m << " K=" << c.k << " N=" << c.n << " */\n"
       << "  {\n"
       << "    const float* x = " << ptr(plan, b.input, "const float") << ";\n"
       << "    int32_t* q = " << ptr(plan, b.qact, "int32_t") << ";\n";
    if (conv) os << "    int32_t* patches = " << ptr(plan, b.patches, "int32_t") << ";\n";
    os << "    uint32_t* packed = " << ptr(plan, b.packed, "uint32_t") << ";\n"
       << "    uint32_t* w = (uint32_t*)(mixq_arena + " << wbuf.offset << "u);\n"
       << "    float* bias = (float*)(mixq_arena + " << bbuf.offset << "u);\n"
       << "    int32_t* acc = " << ptr(plan, b.acc, "int32_t") << ";\n";
    if (b.output >= 0) os << "    float* y = " << ptr(plan, b.output, "float") << ";\n";
    os << "    MIXQ_CHECK(mixq_rt_find(weights, " << c.layer << "u, MIXQ_RT_ROLE_PACKED_WEIGHT, &wrec));\n"
       << "    MIXQ_CHECK(mixq_rt_find(weights, " << c.layer << "u, MIXQ_RT_ROLE_BIAS, &brec));\n"
       << "    mixq_rt_copy(&wrec, w);\n"
       << "    mixq_rt_copy(&brec, bias);\n"
       << "    sa = mixq_rt_compute_scale(x, " << in_count << "u, " << c.scheme_bits.a << ");\n"
       << "    mixq_rt_quantize(x, " << in_count << "u, sa, " << c.scheme_bits.a << ", q);\n";
    if (conv) {
      os << "    mixq_rt_im2col(q, " << c.c << "u, " << c.h << "u, " << c.w << "u, " << c.kh << "u, "
         << c.kw << "u, " << c.stride << "u, " << c.pad << "u, " << im2col_pad_value(c.bits.a)
         << ", patches);\n"
         << "    mixq_rt_pack(patches, ";
    } else {
      os << "    mixq_rt_pack(q, ";
    }
    os << c.m << "u, " << c.k << "u, " << c.bits.a << ", " << c.padded_k << "u, packed);\n"
       << "    MIXQ_CHECK(mixq_rt_matmul(packed, w, " << c.m << "u, " << c.n << "u, " << c.k << "u, "
       << c.padded_k << "u, " << c.bits.a << ", " << c.bits.w << ", " << (conv ? 1 : 0)
       << ", acc));\n"
       << "    MIXQ_CHECK(mixq_rt_bias_dequant(acc, " << c.m << "u, " << c.n << "u, "
       << (conv ? 1 : 0) << ", bias, wrec.scale * sa, "
       << (c.activation == Activation::kRelu ? 1 : 0) << ", " << (b.output >= 0 ? "y" : "(float*)0")
       << "));\n";
    if (b.output < 0) {
      os << "    for (i = 0; i < MIXQ_MODEL_OUTPUT_COUNT; ++i) logits[i] = acc[i];\n";
    }
    os << "  }\n";
  }
  os << "  return MIXQ_RT_OK;\n}\n";
  return os.str();
}

std::string main_c() {
  return R"(/* Generated by mixq: loads weights and one input tensor, prints logits. */
#include <stdio.h>

#include "model.h"

static uint8_t weights_buf[MIXQ_MODEL_WEIGHTS_BYTES];
static uint8_t input_buf[MIXQ_MODEL_INPUT_FILE_BYTES];
static float input[MIXQ_MODEL_INPUT_COUNT];
static int32_t logits[MIXQ_MODEL_OUTPUT_COUNT];

static int read_exact(const char* path, uint8_t* dst, size_t size) {
  FILE* f = fopen(path, "rb");
  size_t got;
  int extra;
  if (!f) return -1;
  got = fread(dst, 1, size, f);
  extra = fgetc(f);
  fclose(f);
  return got == size && extra == EOF ? 0 : -1;
}

int main(int argc, char** argv) {
  const char* weights_path = argc > 1 ? argv[1] : "weights.bin";
  const char* input_path = argc > 2 ? argv[2] : "input.bin";
  mixq_rt_container weights, inputs;
  mixq_rt_record rec;
  mixq_rt_status st;
  size_t i;

  if (read_exact(weights_path, weights_buf, sizeof weights_buf) != 0) {
    fprintf(stderr, "cannot read %s\n", weights_path);
    return 3;
  }
  if (read_exact(input_path, input_buf, sizeof input_buf) != 0) {
    fprintf(stderr, "cannot read %s\n", input_path);
    return 3;
  }
  st = mixq_rt_load_weights(weights_buf, sizeof weights_buf, &weights);
  if (st == MIXQ_RT_OK) st = mixq_rt_load_weights(input_buf, sizeof input_buf, &inputs);
  if (st == MIXQ_RT_OK) st = mixq_rt_find(&inputs, 0u, MIXQ_RT_ROLE_INPUT, &rec);
  if (st == MIXQ_RT_OK && rec.bytes != sizeof input) st = MIXQ_RT_ERR_ARGUMENT;
  if (st != MIXQ_RT_OK) {
    fprintf(stderr, "load failed: status %d\n", (int)st);
    return 3;
  }
  mixq_rt_copy(&rec, input);
  st = mixq_model_run(&weights, input, logits);
  if (st != MIXQ_RT_OK) {
    fprintf(stderr, "inference failed: status %d\n", (int)st);
    return 3;
  }
  for (i = 0; i < MIXQ_MODEL_OUTPUT_COUNT; ++i) printf("%ld\n", (long)logits[i]);
  return 0;
}
)";
}

std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

std::vector<EmittedFile> emit_source(const DeployPlan& plan,
                                     const std::filesystem::path& out_dir) {
  validate_plan(plan);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const auto weights = encode_container(plan.weights);
  const std::size_t input_file_bytes =
      kContainerHeaderBytes + 4 + 1 + 1 + 4 * plan.input_shape.size() +
      4 * static_cast<std::size_t>(plan.input_count);

  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files = {
      {"mixq_rt.h", as_bytes(runtime_header())},
      {"model.h", as_bytes(model_h(plan, weights.size(), input_file_bytes))},
      {"model.c", as_bytes(model_c(plan))},
      {"main.c", as_bytes(main_c())},
      {"weights.bin", weights},
      {"plan.json", as_bytes(to_json(plan).dump(2) + "\n")},
  };
  std::vector<EmittedFile> out;
  nlohmann::json listing = nlohmann::json::array();
  for (const auto& [name, bytes] : files) {
    write_file_bytes(out_dir / name, bytes);
    out.push_back({name, bytes.size(), fnv1a64_hex(bytes)});
    listing.push_back({{"name", name}, {"bytes", bytes.size()}, {"fnv1a64", out.back().fnv1a64}});
  }
  nlohmann::json scheme = nlohmann::json::array();
  for (const auto& p : plan.scheme.pairs) scheme.push_back({p.w, p.a});
  const nlohmann::json manifest = {{"network", plan.network},
                                   {"scheme", scheme},
                                   {"arena_bytes", plan.arena_bytes},
                                   {"notes", plan.notes},
                                   {"files", listing}};
  const auto mbytes = as_bytes(manifest.dump(2) + "\n");
  write_file_bytes(out_dir / "manifest.json", mbytes);
  out.push_back({"manifest.json", mbytes.size(), fnv1a64_hex(mbytes)});
  return out;
}

}  // namespace mixq
