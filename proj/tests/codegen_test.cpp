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


#include <cstdlib>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "mixq/codegen.hpp"
#include "mixq/error.hpp"
#include "mixq/eval.hpp"
#include "test_support.hpp"

namespace mixq {
namespace {

QuantScheme scheme_of(std::vector<LayerBits> pairs) { return {std::move(pairs)}; }

void randomize(NetworkIR& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.5f);
  net.weights.layers.clear();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    l.index = i;
    LayerWeights lw;
    lw.weight.dims = l.weight_shape();
    lw.weight.data.resize(static_cast<std::size_t>(l.weight_count));
    for (auto& v : lw.weight.data) v = n(rng);
    lw.bias.dims = {l.out_channels()};
    lw.bias.data.resize(static_cast<std::size_t>(l.out_channels()));
    for (auto& v : lw.bias.data) v = n(rng);
    net.weights.layers.push_back(lw);
  }
  validate_network(net);
}

NetworkIR conv_net() {
  NetworkIR net;
  net.name = "cnn";
  net.layers = {make_conv2d(2, 9, 9, 5, 3, 2, 1, Activation::kRelu),
                make_conv2d(5, 5, 5, 6, 3, 1, 0, Activation::kRelu),
                make_linear(6 * 3 * 3, 4)};
  randomize(net, 17);
  return net;
}

std::vector<float> random_input(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

TEST(PlanTest, TwoLayerMlpStructure) {
  NetworkIR net;
  net.name = "mlp2";
  net.layers = {make_linear(16, 32, 0, Activation::kRelu), make_linear(32, 4)};
  randomize(net, 1);
  const auto plan = build_plan(net, scheme_of({{4, 8}, {8, 2}}));
  ASSERT_EQ(plan.calls.size(), 2u);
  const auto& a = plan.calls[0].buffers;
  const auto& b = plan.calls[1].buffers;
  EXPECT_EQ(b.input, a.output);
  EXPECT_EQ(b.output, -1);
  const auto& in = plan.buffers[static_cast<std::size_t>(a.input)];
  const auto& mid = plan.buffers[static_cast<std::size_t>(a.output)];
  EXPECT_NE(in.offset, mid.offset);
  EXPECT_EQ(plan.calls[0].bits, (LayerBits{4, 8}));
  EXPECT_EQ(plan.calls[0].padded_k, 16);
  EXPECT_EQ(plan.calls[1].padded_k, 32);
  EXPECT_TRUE(plan.notes.empty());
  EXPECT_EQ(plan.weights.size(), 4u);
}

TEST(PlanTest, ActivationsPingPong) {
  NetworkIR net;
  net.name = "mlp4";
  net.layers = {make_linear(32, 32, 0, Activation::kRelu), make_linear(32, 32, 0, Activation::kRelu),
                make_linear(32, 32, 0, Activation::kRelu), make_linear(32, 8)};
  randomize(net, 2);
  const auto plan = build_plan(net, scheme_of({{8, 8}, {8, 8}, {8, 8}, {8, 8}}));
  std::set<std::size_t> offsets;
  for (const auto& c : plan.calls) {
    if (c.buffers.output >= 0) offsets.insert(plan.buffers[static_cast<std::size_t>(c.buffers.output)].offset);
  }
  EXPECT_EQ(offsets.size(), 2u);
}

// Independent check of the allocator contract on random buffer tables.
TEST(PlanTest, ArenaContract) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DeployBuffer> bufs;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      const int first = static_cast<int>(rng() % 10);
      const int last = first + static_cast<int>(rng() % 4);
      bufs.push_back({"b" + std::to_string(i), 1 + rng() % 500, first, last, 0});
    }
    const auto arena = allocate_arena(bufs);
    for (int t = 0; t < 14; ++t) {
      std::size_t live = 0;
      for (const auto& b : bufs) {
        if (b.first <= t && t <= b.last) live += b.bytes;
      }
      EXPECT_GE(arena, live);
    }
    for (std::size_t i = 0; i < bufs.size(); ++i) {
      EXPECT_EQ(bufs[i].offset % kArenaAlignment, 0u);
      EXPECT_LE(bufs[i].offset + bufs[i].bytes, arena);
      for (std::size_t j = i + 1; j < bufs.size(); ++j) {
        const bool time = bufs[i].first <= bufs[j].last && bufs[j].first <= bufs[i].last;
        const bool space = bufs[i].offset < bufs[j].offset + bufs[j].bytes &&
                           bufs[j].offset < bufs[i].offset + bufs[i].bytes;
        EXPECT_FALSE(time && space) << bufs[i].name << " vs " << bufs[j].name;
      }
    }
  }
}

TEST(PlanTest, OddWidthsAreWidened) {
  auto fx = make_tiny_mlp();
  const auto plan = build_plan(fx.net, scheme_of({{5, 6}, {8, 7}}));
  EXPECT_EQ(plan.calls[0].scheme_bits, (LayerBits{5, 6}));
  EXPECT_EQ(plan.calls[0].bits, (LayerBits{8, 8}));
  EXPECT_EQ(plan.calls[1].bits, (LayerBits{8, 8}));
  ASSERT_EQ(plan.notes.size(), 2u);
  EXPECT_NE(plan.notes[0].find("W5A6"), std::string::npos);
  EXPECT_NE(plan.notes[0].find("W8A8"), std::string::npos);
  EXPECT_EQ(plan.weights[0].bits, 8);
}

TEST(PlanTest, Errors) {
  NetworkIR empty;
  EXPECT_THROW(build_plan(empty, QuantScheme{}), ValidationError);
  auto fx = make_tiny_mlp();
  auto bare = fx.net;
  bare.weights.layers.clear();
  EXPECT_THROW(build_plan(bare, scheme_uniform(bare, 8, BitwidthSet::qat())), ValidationError);
  testing::TempDir dir("codegen_err");
  EXPECT_THROW(emit_source(DeployPlan{}, dir.path()), ValidationError);
}

TEST(PlanTest, FixtureMatchesExecutorOnTestInputs) {
  auto fx = make_tiny_mlp();
  const auto features = static_cast<std::size_t>(fx.data.features);
  ASSERT_GE(fx.data.test_count(), 100u);
  for (const auto& s : {scheme_of({{8, 8}, {8, 8}}), scheme_of({{4, 2}, {2, 4}}),
                        scheme_of({{1, 1}, {1, 2}}), scheme_of({{2, 1}, {8, 1}}),
                        scheme_of({{5, 6}, {7, 4}})}) {
    const auto qm = quantize_model(fx.net, s);
    const auto plan = build_plan(fx.net, qm);
    const auto bin = encode_container(plan.weights);
    for (std::size_t i = 0; i < 100; ++i) {
      std::span<const float> x(fx.data.test_x.data() + i * features, features);
      ASSERT_EQ(run_plan(plan, bin, x), run_integer(fx.net, qm, x)) << s.to_string() << " #" << i;
    }
  }
}

TEST(PlanTest, ConvNetMatchesExecutor) {
  const auto net = conv_net();
  std::mt19937_64 rng(3);
  for (const auto& s : {scheme_of({{8, 8}, {4, 4}, {8, 8}}), scheme_of({{1, 1}, {2, 1}, {1, 2}}),
                        scheme_of({{2, 8}, {8, 1}, {4, 2}})}) {
    const auto qm = quantize_model(net, s);
    const auto plan = build_plan(net, qm);
    EXPECT_GE(plan.calls[0].buffers.patches, 0);
    const auto bin = encode_container(plan.weights);
    for (int i = 0; i < 20; ++i) {
      const auto x = random_input(2 * 9 * 9, rng);
      ASSERT_EQ(run_plan(plan, bin, x), run_integer(net, qm, x)) << s.to_string();
    }
  }
}

TEST(PlanTest, StaleWeightsAreRejected) {
  auto fx = make_tiny_mlp();
  const auto plan = build_plan(fx.net, scheme_uniform(fx.net, 4, BitwidthSet::qat()));
  const auto other = build_plan(fx.net, scheme_uniform(fx.net, 2, BitwidthSet::qat()));
  auto bin = encode_container(other.weights);
  std::vector<float> x(16, 0.5f);
  EXPECT_THROW(run_plan(plan, bin, x), FormatError);
  bin = encode_container(plan.weights);
  EXPECT_NO_THROW(run_plan(plan, bin, x));
  bin.resize(bin.size() / 2);
  EXPECT_THROW(run_plan(plan, bin, x), FormatError);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(EmitTest, DeterministicAndListed) {
  auto fx = make_tiny_mlp();
  const auto plan = build_plan(fx.net, scheme_of({{4, 2}, {8, 8}}));
  testing::TempDir a("emit_a"), b("emit_b");
  const auto files = emit_source(plan, a.path());
  emit_source(plan, b.path());
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) listed.insert(f["name"].get<std::string>());
  for (const auto& f : files) {
    EXPECT_EQ(slurp(a / f.name), slurp(b / f.name)) << f.name;
    EXPECT_EQ(std::filesystem::file_size(a / f.name), f.bytes);
    if (f.name != "manifest.json") EXPECT_TRUE(listed.count(f.name)) << f.name;
  }
  for (const char* name : {"model.c", "model.h", "main.c", "mixq_rt.h", "weights.bin"}) {
    EXPECT_TRUE(listed.count(name)) << name;
  }
  const auto back = read_container(a / "weights.bin");
  ASSERT_EQ(back.size(), plan.weights.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].dims, plan.weights[i].dims);
    EXPECT_EQ(back[i].bits, plan.weights[i].bits);
    EXPECT_EQ(back[i].scale, plan.weights[i].scale);
    EXPECT_EQ(back[i].payload, plan.weights[i].payload);
  }
  EXPECT_EQ(slurp(a / "mixq_rt.h"), runtime_header());
}

TEST(EmitTest, InputTensorFileSize) {
  testing::TempDir dir("emit_in");
  auto fx = make_tiny_mlp();
  const auto plan = build_plan(fx.net, scheme_uniform(fx.net, 8, BitwidthSet::qat()));
  emit_source(plan, dir.path());
  std::vector<float> x(16, 1.0f);
  write_input_tensor(dir / "input.bin", plan.input_shape, x);
  const auto header = slurp(dir / "model.h");
  const auto size = std::filesystem::file_size(dir / "input.bin");
  EXPECT_NE(header.find("MIXQ_MODEL_INPUT_FILE_BYTES " + std::to_string(size) + "u"), std::string::npos);
  const auto wsize = std::filesystem::file_size(dir / "weights.bin");
  EXPECT_NE(header.find("MIXQ_MODEL_WEIGHTS_BYTES " + std::to_string(wsize) + "u"), std::string::npos);
  EXPECT_THROW(write_input_tensor(dir / "bad.bin", plan.input_shape, std::vector<float>(3)),
               ValidationError);
}

TEST(EmitTest, GeneratedSourceIsValidC) {
#ifndef MIXQ_TEST_CC
  GTEST_SKIP() << "no C compiler configured";
#else
  testing::TempDir dir("emit_cc");
  emit_source(build_plan(conv_net(), scheme_of({{8, 8}, {5, 2}, {1, 1}})), dir.path());
  const std::string cmd = std::string(MIXQ_TEST_CC) + " -std=c11 -Wall -Wextra -Werror -fsyntax-only -I" +
                          dir.path().string() + " " + (dir / "model.c").string() + " " +
                          (dir / "main.c").string();
  EXPECT_EQ(std::system(cmd.c_str()), 0) << cmd;
#endif
}

}  // namespace
}  // namespace mixq
