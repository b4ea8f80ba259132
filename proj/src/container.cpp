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

#include "mixq/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mixq/error.hpp"

namespace mixq {
namespace {

constexpr char kMagic[4] = {'M', 'I', 'C', 'O'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> bytes(std::uint64_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("container: truncated data");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

bool has_quant_header(Role role) {
  return role == Role::kPackedWeight || role == Role::kIntBias;
}

}  // namespace

std::uint64_t TensorRecord::numel() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

TensorRecord TensorRecord::from_floats(std::uint32_t layer, Role role,
                                       std::vector<std::uint32_t> dims,
                                       std::span<const float> values) {
  TensorRecord rec;
  rec.layer = layer;
  rec.role = role;
  rec.dims = std::move(dims);
  if (rec.numel() != values.size()) {
    throw ValidationError("container: value count does not match dims");
  }
  Writer w;
  for (float v : values) w.f32(v);
  rec.payload = w.take();
  return rec;
}

std::vector<float> TensorRecord::floats() const {
  Reader r(payload);
  std::vector<float> out(payload.size() / 4);
  for (auto& v : out) v = r.f32();
  return out;
}

std::vector<std::uint32_t> TensorRecord::words() const {
  Reader r(payload);
  std::vector<std::uint32_t> out(payload.size() / 4);
  for (auto& v : out) v = r.u32();
  return out;
}

std::vector<std::int32_t> TensorRecord::int32s() const {
  Reader r(payload);
  std::vector<std::int32_t> out(payload.size() / 4);
  for (auto& v : out) v = static_cast<std::int32_t>(r.u32());
  return out;
}

std::uint64_t expected_payload_bytes(const TensorRecord& rec) {
  const std::uint64_t n = rec.numel();
  switch (rec.role) {
    case Role::kWeight:
    case Role::kBias:
    case Role::kDataset:
    case Role::kInput:
      return 4 * n;
    case Role::kIntBias:
      return 4 * n;
    case Role::kPackedWeight: {
      const unsigned b = rec.bits;
      if (b == 1 || b == 2 || b == 4 || b == 8) {
        if (rec.dims.size() != 2) {
          throw FormatError("container: packed weight must be rank 2");
        }
        const std::uint64_t row_words = (std::uint64_t{rec.dims[1]} * b + 31) / 32;
        return 4 * row_words * rec.dims[0];
      }
      if (b >= 5 && b <= 7) return n;
      throw FormatError("container: unsupported packed bitwidth " +
                        std::to_string(b));
    }
  }
  throw FormatError("container: unknown role");
}

std::vector<std::uint8_t> encode_container(
    std::span<const TensorRecord> records) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) {
    if (rec.dims.size() > 255) throw ValidationError("container: rank > 255");
    if (rec.payload.size() != expected_payload_bytes(rec)) {
      throw ValidationError("container: payload size mismatch for layer " +
                            std::to_string(rec.layer));
    }
    w.u32(rec.layer);
    w.u8(static_cast<std::uint8_t>(rec.role));
    w.u8(static_cast<std::uint8_t>(rec.dims.size()));
    for (auto d : rec.dims) w.u32(d);
    if (has_quant_header(rec.role)) {
      w.u8(rec.bits);
      w.f32(rec.scale);
    }
    w.bytes(rec.payload);
  }
  return w.take();
}

std::vector<TensorRecord> decode_container(
    std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) {
      throw FormatError("container: bad magic");
    }
  }
  const auto version = r.u32();
  if (version != kContainerVersion) {
    throw FormatError("container: unsupported version " +
                      std::to_string(version));
  }
  const auto count = r.u32();
  std::vector<TensorRecord> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord rec;
    rec.layer = r.u32();
    const auto role = r.u8();
    if (role > static_cast<std::uint8_t>(Role::kInput)) {
      throw FormatError("container: unknown role " + std::to_string(role));
    }
    rec.role = static_cast<Role>(role);
    const auto rank = r.u8();
    rec.dims.resize(rank);
    for (auto& d : rec.dims) d = r.u32();
    if (has_quant_header(rec.role)) {
      rec.bits = r.u8();
      rec.scale = r.f32();
    }
    const auto payload = r.bytes(expected_payload_bytes(rec));
    rec.payload.assign(payload.begin(), payload.end());
    out.push_back(std::move(rec));
  }
  if (!r.done()) throw FormatError("container: trailing bytes");
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_container(const std::filesystem::path& path,
                     std::span<const TensorRecord> records) {
  write_file_bytes(path, encode_container(records));
}

std::vector<TensorRecord> read_container(const std::filesystem::path& path) {
  return decode_container(read_file_bytes(path));
}

}  // namespace mixq
