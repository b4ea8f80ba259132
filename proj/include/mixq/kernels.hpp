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

#ifndef MIXQ_KERNELS_HPP_
#define MIXQ_KERNELS_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mixq/model_ir.hpp"

namespace mixq {

// One of the ten mixed-precision dot-product instructions. rs1 holds
// 32/bw lanes of bw-bit elements; rs2 holds the same number of lanes at
// ba <= bw bits in its low lanes*ba bits.
struct DotPOp {
  int bw = 8;
  int ba = 8;

  int lanes() const { return 32 / bw; }
  friend bool operator==(const DotPOp&, const DotPOp&) = default;
};

bool is_valid_op(int bw, int ba);
DotPOp make_op(int bw, int ba);
// The op for a (weight, activation) pair: the wider operand goes to rs1.
DotPOp op_for(int bits_a, int bits_b);
const std::vector<DotPOp>& all_ops();

std::int32_t dotp(DotPOp op, std::uint32_t rs1, std::uint32_t rs2);

struct IntMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> data;

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::int32_t& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int32_t at(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;
};

struct KernelStats {
  std::uint64_t dotp_count = 0;
  std::uint64_t scalar_mac_count = 0;
  std::uint64_t pack_ops = 0;
  std::uint64_t quant_ops = 0;

  KernelStats& operator+=(const KernelStats& o);
};

enum class KernelVariant { kRef, kPacked };

// Rows of a matrix packed at `bits`, each row starting on a word boundary
// and zero-padded (+1 for 1-bit) to padded_cols elements.
struct PackedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t padded_cols = 0;
  int bits = 8;
  std::size_t row_words = 0;
  std::vector<std::uint32_t> words;

  std::span<const std::uint32_t> row(std::size_t r) const {
    return {words.data() + r * row_words, row_words};
  }
};

std::size_t round_up(std::size_t n, std::size_t multiple);

// Checks that every element is representable at `bits`.
void check_range(std::span<const std::int32_t> values, int bits);

PackedMatrix pack_rows(const IntMatrix& m, int bits, std::size_t padded_cols);

// out[m][n] = sum_k act[m][k] * weight[n][k], exact in 32 bits. Throws
// OverflowError if any partial sum leaves int32.
IntMatrix matmul_ref(const IntMatrix& act, const IntMatrix& weight,
                     int act_bits, int weight_bits,
                     KernelStats* stats = nullptr);

// Same contract computed with dotp over packed rows.
IntMatrix matmul_packed(const PackedMatrix& act, const PackedMatrix& weight,
                        KernelStats* stats = nullptr);

std::pair<IntMatrix, KernelStats> matmul(const IntMatrix& act,
                                         const IntMatrix& weight, int act_bits,
                                         int weight_bits,
                                         KernelVariant variant);

// Spatial padding value used by im2col: 0, or +1 for 1-bit activations
// since 0 is not representable there.
std::int32_t im2col_pad_value(int act_bits);

// Lowers a [C, H, W] input into [OH*OW, C*kh*kw] patches (c, ky, kx order).
IntMatrix im2col(std::span<const std::int32_t> input, const LayerDesc& layer,
                 std::int32_t pad_value);

// Returns the [O, OH, OW] accumulator tensor. `weight` is [O, C*kh*kw].
std::pair<std::vector<std::int32_t>, KernelStats> conv2d(
    std::span<const std::int32_t> input, const IntMatrix& weight,
    const LayerDesc& layer, int weight_bits, int act_bits,
    KernelVariant variant);

}  // namespace mixq

#endif  // MIXQ_KERNELS_HPP_
