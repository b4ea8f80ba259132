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

#include "mixq/kernels.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <string>

#include "mixq/error.hpp"
#include "mixq/quant.hpp"

namespace mixq {
namespace {

void accumulate_checked(std::int64_t sum, std::int32_t& out) {
  if (sum > std::numeric_limits<std::int32_t>::max() ||
      sum < std::numeric_limits<std::int32_t>::min()) {
    throw OverflowError("int32 accumulator overflow");
  }
  out = static_cast<std::int32_t>(sum);
}

// Low bits of the word holding `lanes` elements starting at group g.
std::uint32_t group_word(std::span<const std::uint32_t> row, std::size_t g,
                         int lanes, int bits) {
  const std::size_t bit = g * static_cast<std::size_t>(lanes) * bits;
  return row[bit / 32] >> (bit % 32);
}

}  // namespace

KernelStats& KernelStats::operator+=(const KernelStats& o) {
  dotp_count += o.dotp_count;
  scalar_mac_count += o.scalar_mac_count;
  pack_ops += o.pack_ops;
  quant_ops += o.quant_ops;
  return *this;
}

bool is_valid_op(int bw, int ba) {
  return packable_bits(bw) && packable_bits(ba) && ba <= bw;
}

DotPOp make_op(int bw, int ba) {
  if (!is_valid_op(bw, ba)) {
    throw ValidationError("no DotP." + std::to_string(bw) + "x" +
                          std::to_string(ba) + " instruction");
  }
  return {bw, ba};
}

DotPOp op_for(int bits_a, int bits_b) {
  return make_op(std::max(bits_a, bits_b), std::min(bits_a, bits_b));
}

const std::vector<DotPOp>& all_ops() {
  static const std::vector<DotPOp> ops = {
      {8, 8}, {8, 4}, {8, 2}, {8, 1}, {4, 4},
      {4, 2}, {4, 1}, {2, 2}, {2, 1}, {1, 1}};
  return ops;
}

std::int32_t dotp(DotPOp op, std::uint32_t rs1, std::uint32_t rs2) {
  if (!is_valid_op(op.bw, op.ba)) make_op(op.bw, op.ba);
  if (op.bw == 1) {
    return 32 - 2 * std::popcount(rs1 ^ rs2);
  }
  std::int32_t sum = 0;
  for (int i = 0; i < op.lanes(); ++i) {
    sum += decode_field(rs1 >> (i * op.bw), op.bw) *
           decode_field(rs2 >> (i * op.ba), op.ba);
  }
  return sum;
}

std::size_t round_up(std::size_t n, std::size_t multiple) {
  return (n + multiple - 1) / multiple * multiple;
}

void check_range(std::span<const std::int32_t> values, int bits) {
  for (auto v : values) encode_field(v, bits);
}

PackedMatrix pack_rows(const IntMatrix& m, int bits, std::size_t padded_cols) {
  if (!packable_bits(bits)) {
    throw ValidationError("cannot pack " + std::to_string(bits) + "-bit rows");
  }
  if (padded_cols < m.cols) throw ValidationError("padded_cols < cols");
  PackedMatrix p;
  p.rows = m.rows;
  p.cols = m.cols;
  p.padded_cols = padded_cols;
  p.bits = bits;
  p.row_words = (padded_cols * bits + 31) / 32;
  p.words.assign(p.rows * p.row_words, 0u);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::uint32_t* row = p.words.data() + r * p.row_words;
    for (std::size_t c = 0; c < m.cols; ++c) {
      const std::size_t bit = c * bits;
      row[bit / 32] |= encode_field(m.at(r, c), bits) << (bit % 32);
    }
  }
  return p;
}

IntMatrix matmul_ref(const IntMatrix& act, const IntMatrix& weight,
                     int act_bits, int weight_bits, KernelStats* stats) {
  if (act.cols != weight.cols) {
    throw ValidationError("matmul: reduction dims differ (" +
                          std::to_string(act.cols) + " vs " +
                          std::to_string(weight.cols) + ")");
  }
  check_range(act.data, act_bits);
  check_range(weight.data, weight_bits);
  IntMatrix out(act.rows, weight.rows);
  for (std::size_t m = 0; m < act.rows; ++m) {
    for (std::size_t n = 0; n < weight.rows; ++n) {
      std::int64_t sum = 0;
      for (std::size_t k = 0; k < act.cols; ++k) {
        sum += std::int64_t{act.at(m, k)} * weight.at(n, k);
      }
      accumulate_checked(sum, out.at(m, n));
    }
  }
  if (stats) {
    stats->scalar_mac_count += act.rows * weight.rows * act.cols;
  }
  return out;
}

IntMatrix matmul_packed(const PackedMatrix& act, const PackedMatrix& weight,
                        KernelStats* stats) {
  if (act.cols != weight.cols || act.padded_cols != weight.padded_cols) {
    throw ValidationError("matmul_packed: reduction dims differ");
  }
  const DotPOp op = op_for(act.bits, weight.bits);
  const int lanes = op.lanes();
  if (act.padded_cols % lanes != 0) {
    throw ValidationError("matmul_packed: padded length is not a lane multiple");
  }
  const bool act_is_rs1 = act.bits >= weight.bits;
  const std::size_t groups = act.padded_cols / lanes;
  // Pad fields decode to +1 only at 1 bit; 0 otherwise.
  const std::int64_t pad_bias =
      (act.bits == 1 && weight.bits == 1)
          ? static_cast<std::int64_t>(act.padded_cols - act.cols)
          : 0;

  IntMatrix out(act.rows, weight.rows);
  for (std::size_t m = 0; m < act.rows; ++m) {
    const auto arow = act.row(m);
    for (std::size_t n = 0; n < weight.rows; ++n) {
      const auto wrow = weight.row(n);
      std::int64_t sum = 0;
      for (std::size_t g = 0; g < groups; ++g) {
        const auto aw = group_word(arow, g, lanes, act.bits);
        const auto ww = group_word(wrow, g, lanes, weight.bits);
        sum += act_is_rs1 ? dotp(op, aw, ww) : dotp(op, ww, aw);
      }
      accumulate_checked(sum - pad_bias, out.at(m, n));
    }
  }
  if (stats) {
    stats->dotp_count += act.rows * weight.rows * groups;
    stats->scalar_mac_count += act.rows * weight.rows * act.cols;
  }
  return out;
}

std::pair<IntMatrix, KernelStats> matmul(const IntMatrix& act,
                                         const IntMatrix& weight, int act_bits,
                                         int weight_bits,
                                         KernelVariant variant) {
  KernelStats stats;
  if (variant == KernelVariant::kRef) {
    auto out = matmul_ref(act, weight, act_bits, weight_bits, &stats);
    return {std::move(out), stats};
  }
  if (act.cols != weight.cols) {
    throw ValidationError("matmul: reduction dims differ");
  }
  const DotPOp op = op_for(act_bits, weight_bits);
  const std::size_t padded = round_up(std::max<std::size_t>(act.cols, 1), op.lanes());
  const auto pa = pack_rows(act, act_bits, padded);
  const auto pw = pack_rows(weight, weight_bits, padded);
  stats.pack_ops += pa.words.size() + pw.words.size();
  auto out = matmul_packed(pa, pw, &stats);
  return {std::move(out), stats};
}

std::int32_t im2col_pad_value(int act_bits) { return act_bits == 1 ? 1 : 0; }

IntMatrix im2col(std::span<const std::int32_t> input, const LayerDesc& layer,
                 std::int32_t pad_value) {
  if (layer.kind != LayerKind::kConv2D) {
    throw ValidationError("im2col needs a Conv2D layer");
  }
  const auto c_in = layer.in_shape[0], h = layer.in_shape[1],
             w = layer.in_shape[2];
  const auto oh = layer.out_shape[1], ow = layer.out_shape[2];
  const auto kh = layer.kernel_h, kw = layer.kernel_w;
  if (static_cast<std::int64_t>(input.size()) != c_in * h * w) {
    throw ValidationError("conv2d: input size does not match layer shape");
  }
  IntMatrix cols(static_cast<std::size_t>(oh * ow),
                 static_cast<std::size_t>(c_in * kh * kw));
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const auto r = static_cast<std::size_t>(oy * ow + ox);
      std::size_t col = 0;
      for (std::int64_t c = 0; c < c_in; ++c) {
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          for (std::int64_t kx = 0; kx < kw; ++kx, ++col) {
            const auto iy = oy * layer.stride + ky - layer.pad;
            const auto ix = ox * layer.stride + kx - layer.pad;
            const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
            cols.at(r, col) =
                inside ? input[static_cast<std::size_t>((c * h + iy) * w + ix)]
                       : pad_value;
          }
        }
      }
    }
  }
  return cols;
}

std::pair<std::vector<std::int32_t>, KernelStats> conv2d(
    std::span<const std::int32_t> input, const IntMatrix& weight,
    const LayerDesc& layer, int weight_bits, int act_bits,
    KernelVariant variant) {
  if (weight.rows != static_cast<std::size_t>(layer.out_channels()) ||
      weight.cols != static_cast<std::size_t>(layer.reduction())) {
    throw ValidationError("conv2d: weight matrix shape mismatch");
  }
  const auto patches = im2col(input, layer, im2col_pad_value(act_bits));
  auto [prod, stats] = matmul(patches, weight, act_bits, weight_bits, variant);
  // [OH*OW, O] -> [O, OH, OW]
  std::vector<std::int32_t> out(prod.data.size());
  for (std::size_t p = 0; p < prod.rows; ++p) {
    for (std::size_t o = 0; o < prod.cols; ++o) {
      out[o * prod.rows + p] = prod.at(p, o);
    }
  }
  return {std::move(out), stats};
}

}  // namespace mixq
