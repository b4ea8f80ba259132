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


#ifndef MIXQ_EVAL_HPP_
#define MIXQ_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixq/model_ir.hpp"

namespace mixq {

// Deterministic accuracy model over schemes:
//   acc_max - sum s_i (g(8) - g(bw_i)) - sum t_i (g(8) - g(ba_i))
//           - sum cw_i max(0, 4 - bw_i)/3 - sum ca_i max(0, 4 - ba_i)/3
//           - sum u_i (g(8) - g(ba_i)) (g(8) - g(bw_{i+1}))
// with g(b) = 1 - 2^-b, clamped to [0, 1]. First and last layers get
// doubled sensitivities.
struct SyntheticOracle {
  double acc_max = 0.9;
  std::vector<double> s, t;      // weight / activation sensitivity
  std::vector<double> cw, ca;    // sub-4-bit cliff weights
  std::vector<double> u;         // adjacent-layer interaction, size L-1
  std::uint64_t seed = 0;

  static SyntheticOracle make(std::size_t num_layers, std::uint64_t seed);

  std::size_t size() const { return s.size(); }
  double accuracy(const QuantScheme& scheme) const;
};

nlohmann::json to_json(const SyntheticOracle& o);
SyntheticOracle oracle_from_json(const nlohmann::json& j);

// Classification data set, row-major features.
struct Dataset {
  int features = 0;
  int classes = 0;
  std::vector<float> train_x;
  std::vector<int> train_y;
  std::vector<float> test_x;
  std::vector<int> test_y;

  std::size_t train_count() const { return train_y.size(); }
  std::size_t test_count() const { return test_y.size(); }
};

// Gaussian clusters: one unit-variance blob per class around a random mean.
Dataset make_cluster_dataset(std::uint64_t seed, int features = 16,
                             int classes = 4, int train = 2000, int test = 500);

// Stored as a container of role-4 tensors: layer 0 train_x, 1 train_y,
// 2 test_x, 3 test_y (labels as floats).
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct TrainConfig {
  int epochs = 20;
  double lr = 0.05;
  int batch = 64;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

// Double-precision multilayer perceptron of Linear layers with optional
// fake quantization (straight-through estimator) in the forward pass.
class Mlp {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    bool relu = false;
    std::vector<double> w;  // [out, in]
    std::vector<double> b;  // [out]
  };

  Mlp() = default;
  Mlp(std::vector<int> widths, std::uint64_t seed);  // relu on hidden layers
  static Mlp from_network(const NetworkIR& net);
  NetworkIR to_network(const std::string& name) const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t num_params() const;

  // Mean softmax cross-entropy over the n rows of x. With `scheme`, weights
  // and each layer input are fake-quantized per tensor (per sample for
  // activations). `grad` (same layout as layers) is overwritten when given.
  // quantize_inputs = false keeps activations in float.
  double loss(std::span<const double> x, std::span<const int> y,
              const QuantScheme* scheme = nullptr,
              std::vector<Layer>* grad = nullptr,
              bool quantize_inputs = true) const;

  std::vector<double> forward(std::span<const double> x) const;

 private:
  std::vector<Layer> layers_;
};

// Mini-batch SGD with momentum. Returns the loss of every batch.
std::vector<double> train_sgd(Mlp& mlp, const Dataset& ds, const TrainConfig& cfg,
                              int epochs, const QuantScheme* scheme = nullptr);

double float_accuracy(const Mlp& mlp, const Dataset& ds);

// 16 -> 32 -> 4 MLP pre-trained on the cluster data set.
struct TinyMlpFixture {
  NetworkIR net;
  Dataset data;
  TrainConfig train;
};

TinyMlpFixture make_tiny_mlp(std::uint64_t seed = 7);

// Integer inference accuracy on the test split.
double ptq_evaluate(const NetworkIR& net, const QuantScheme& scheme,
                    const Dataset& ds);

enum class QatBudget { kShort, kFinal };

// Retraining epochs: ceil(pretrain/20) short, ceil(pretrain/10) final, >= 1.
int qat_epochs(int pretrain_epochs, QatBudget budget);

// Fine-tunes a clone of the float weights with fake quantization, then
// validates like ptq_evaluate.
double qat_evaluate(const NetworkIR& net, const QuantScheme& scheme,
                    const Dataset& ds, const TrainConfig& pretrain,
                    QatBudget budget, std::uint64_t seed);

std::uint64_t scheme_hash(const QuantScheme& scheme);

using Evaluator = std::function<double(const QuantScheme&)>;

}  // namespace mixq

#endif  // MIXQ_EVAL_HPP_
