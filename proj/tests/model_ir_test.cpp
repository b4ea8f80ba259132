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

#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mixq/container.hpp"
#include "mixq/error.hpp"
#include "mixq/model_ir.hpp"
#include "test_support.hpp"

namespace mixq {
namespace {

using testing::data_path;
using testing::TempDir;

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(ModelIrTest, LenetFixtureHasFiveLayers) {
  const auto net = load_network(data_path("lenet5.json"));
  ASSERT_EQ(net.size(), 5u);
  EXPECT_EQ(net.layers[0].kind, LayerKind::kConv2D);
  EXPECT_EQ(net.layers[1].kind, LayerKind::kConv2D);
  for (int i = 2; i < 5; ++i) EXPECT_EQ(net.layers[i].kind, LayerKind::kLinear);
}

TEST(ModelIrTest, LinearMacs) {
  const auto l = make_linear(10, 20);
  EXPECT_EQ(l.macs, 200);
  EXPECT_EQ(l.weight_count, 200);
  EXPECT_EQ(l.activation_count, 10);
}

TEST(ModelIrTest, ConvMacsAndOutputShape) {
  const auto l = make_conv2d(1, 8, 8, 4, 3);
  EXPECT_EQ(l.out_shape, (std::vector<std::int64_t>{4, 6, 6}));
  EXPECT_EQ(l.macs, 6 * 6 * 4 * 1 * 3 * 3);
  EXPECT_EQ(l.macs, 1296);
  EXPECT_EQ(l.weight_count, 36);
  EXPECT_EQ(l.activation_count, 64);
}

TEST(ModelIrTest, RowBatchedLinearMacs) {
  const auto l = make_linear(64, 64, 64);
  EXPECT_EQ(l.macs, 64 * 64 * 64);
  EXPECT_EQ(l.rows(), 64);
}

TEST(ModelIrTest, StoredMacsMatchRecomputedForFixtures) {
  for (const char* name : {"lenet5.json", "mlp8.json"}) {
    std::ifstream in(data_path(name));
    const auto j = nlohmann::json::parse(in);
    const auto net = load_network(data_path(name));
    for (std::size_t i = 0; i < net.size(); ++i) {
      EXPECT_EQ(j["layers"][i]["macs"].get<std::int64_t>(), net.layers[i].macs)
          << name << " layer " << i;
    }
  }
}

TEST(ModelIrTest, UniformScheme) {
  const auto net = load_network(data_path("lenet5.json"));
  const auto s8 = scheme_uniform(net, 8, BitwidthSet::qat());
  EXPECT_EQ(s8.pairs, std::vector<LayerBits>(5, LayerBits{8, 8}));
  const auto s1 = scheme_uniform(net, 1, BitwidthSet::qat());
  EXPECT_EQ(s1.pairs, std::vector<LayerBits>(5, LayerBits{1, 1}));
  EXPECT_THROW(scheme_uniform(net, 3, BitwidthSet::qat()), ValidationError);
  EXPECT_THROW(scheme_uniform(net, 1, BitwidthSet::ptq()), ValidationError);
}

TEST(ModelIrTest, UniformSchemeOnEmptyNetworkFails) {
  NetworkIR empty;
  EXPECT_THROW(scheme_uniform(empty, 8, BitwidthSet::qat()), ValidationError);
}

TEST(ModelIrTest, SaveLoadRoundTripWithWeights) {
  TempDir dir("ir_roundtrip");
  NetworkIR net;
  net.name = "rt";
  net.dataset = "toy";
  net.float_accuracy = 0.75;
  net.layers.push_back(make_conv2d(2, 5, 5, 3, 3, 1, 1, Activation::kRelu));
  net.layers.push_back(make_linear(75, 4));
  net.layers[1].index = 1;
  float v = 0.0f;
  for (const auto& l : net.layers) {
    LayerWeights w;
    w.weight.dims = l.weight_shape();
    for (std::int64_t i = 0; i < l.weight_count; ++i) {
      w.weight.data.push_back(v += 0.01f);
    }
    w.bias.dims = {l.out_channels()};
    w.bias.data.assign(static_cast<std::size_t>(l.out_channels()), -0.5f);
    net.weights.layers.push_back(std::move(w));
  }
  save_network(net, dir / "net.json");
  const auto back = load_network(dir / "net.json");

  EXPECT_EQ(back.name, net.name);
  EXPECT_EQ(back.dataset, net.dataset);
  EXPECT_DOUBLE_EQ(back.float_accuracy, net.float_accuracy);
  ASSERT_EQ(back.size(), net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& a = net.layers[i];
    const auto& b = back.layers[i];
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.activation, b.activation);
    EXPECT_EQ(a.in_shape, b.in_shape);
    EXPECT_EQ(a.out_shape, b.out_shape);
    EXPECT_EQ(a.macs, b.macs);
    EXPECT_EQ(net.weights.layers[i].weight.data,
              back.weights.layers[i].weight.data);
    EXPECT_EQ(net.weights.layers[i].bias.dims,
              back.weights.layers[i].bias.dims);
  }
}

TEST(ModelIrTest, RejectsMalformedJson) {
  TempDir dir("ir_bad");
  write_text(dir / "bad.json", "{\"layers\": [");
  EXPECT_THROW(load_network(dir / "bad.json"), FormatError);
}

TEST(ModelIrTest, RejectsShapeInconsistency) {
  TempDir dir("ir_shape");
  write_text(dir / "n.json", R"({"name":"x","layers":[
    {"kind":"Conv2D","in_shape":[1,8,8],"out_shape":[4,5,5],"kernel":3}]})");
  EXPECT_THROW(load_network(dir / "n.json"), ValidationError);

  write_text(dir / "chain.json", R"({"name":"x","layers":[
    {"kind":"Linear","in_shape":[10],"out_shape":[20]},
    {"kind":"Linear","in_shape":[21],"out_shape":[2]}]})");
  EXPECT_THROW(load_network(dir / "chain.json"), ValidationError);

  write_text(dir / "macs.json", R"({"name":"x","layers":[
    {"kind":"Linear","in_shape":[10],"out_shape":[20],"macs":199}]})");
  EXPECT_THROW(load_network(dir / "macs.json"), ValidationError);
}

TEST(ModelIrTest, RejectsUnsupportedKindAndBranching) {
  TempDir dir("ir_kind");
  write_text(dir / "k.json", R"({"name":"x","layers":[
    {"kind":"LayerNorm","in_shape":[10],"out_shape":[10]}]})");
  EXPECT_THROW(load_network(dir / "k.json"), ValidationError);

  write_text(dir / "res.json", R"({"name":"x","layers":[
    {"kind":"Linear","in_shape":[10],"out_shape":[10]},
    {"kind":"Linear","in_shape":[10],"out_shape":[10],"inputs":[1]},
    {"kind":"Linear","in_shape":[10],"out_shape":[10],"inputs":[0]}]})");
  EXPECT_THROW(load_network(dir / "res.json"), ValidationError);
}

TEST(ModelIrTest, RejectsWeightShapeMismatch) {
  TempDir dir("ir_w");
  const std::vector<float> w(6, 1.0f), b(2, 0.0f);
  const std::vector<TensorRecord> recs = {
      TensorRecord::from_floats(0, Role::kWeight, {2, 3}, w),
      TensorRecord::from_floats(0, Role::kBias, {2}, b)};
  write_container(dir / "w.bin", recs);
  write_text(dir / "n.json", R"({"name":"x","weights_file":"w.bin","layers":[
    {"kind":"Linear","in_shape":[4],"out_shape":[2]}]})");
  EXPECT_THROW(load_network(dir / "n.json"), ValidationError);
}

TEST(ContainerTest, RejectsTruncatedAndBadMagic) {
  const std::vector<float> w(4, 2.0f);
  const std::vector<TensorRecord> recs = {
      TensorRecord::from_floats(3, Role::kInput, {2, 2}, w)};
  auto bytes = encode_container(recs);
  const auto back = decode_container(bytes);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].layer, 3u);
  EXPECT_EQ(back[0].floats(), w);

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_container(truncated), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_container(bad), FormatError);
}

TEST(ContainerTest, HeaderLayoutIsLittleEndian) {
  const std::vector<float> one = {1.0f};
  const std::vector<TensorRecord> recs = {
      TensorRecord::from_floats(7, Role::kBias, {1}, one)};
  const auto bytes = encode_container(recs);
  const std::vector<std::uint8_t> expected = {
      'M', 'I', 'C', 'O', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
      7, 0, 0, 0, 1, 1, 1, 0, 0, 0,                // layer, role, rank, dims
      0x00, 0x00, 0x80, 0x3f};                     // 1.0f
  EXPECT_EQ(bytes, expected);
}

}  // namespace
}  // namespace mixq
