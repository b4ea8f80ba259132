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

#ifndef MIXQ_CONTAINER_HPP_
#define MIXQ_CONTAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mixq {

// Binary tensor container shared by float weights, quantized weights,
// datasets and input tensors.
//
//   "MICO" | version u32 | count u32 | record*
//   record := layer u32 | role u8 | rank u8 | dims u32[rank]
//             [bits u8 | scale f32]   (roles 2 and 3 only)
//             payload
//
// All integers and floats are little-endian. Payload encoding depends on
// the role:
//   kWeight, kBias, kDataset, kInput: f32 per element
//   kPackedWeight: bits in {1,2,4,8}: dims = [rows, padded_cols], each row
//                  packed into ceil(padded_cols*bits/32) u32 words;
//                  bits in {5,6,7}: one signed byte per element
//   kIntBias: i32 per element
enum class Role : std::uint8_t {
  kWeight = 0,
  kBias = 1,
  kPackedWeight = 2,
  kIntBias = 3,
  kDataset = 4,
  kInput = 5,
};

inline constexpr std::uint32_t kContainerVersion = 1;

struct TensorRecord {
  std::uint32_t layer = 0;
  Role role = Role::kWeight;
  std::vector<std::uint32_t> dims;
  std::uint8_t bits = 0;
  float scale = 0.0f;
  std::vector<std::uint8_t> payload;

  std::uint64_t numel() const;

  static TensorRecord from_floats(std::uint32_t layer, Role role,
                                  std::vector<std::uint32_t> dims,
                                  std::span<const float> values);
  std::vector<float> floats() const;
  std::vector<std::uint32_t> words() const;
  std::vector<std::int32_t> int32s() const;
};

// Payload byte size implied by the record header; throws FormatError for
// unsupported role/bits combinations.
std::uint64_t expected_payload_bytes(const TensorRecord& rec);

std::vector<std::uint8_t> encode_container(
    std::span<const TensorRecord> records);
std::vector<TensorRecord> decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path,
                     std::span<const TensorRecord> records);
std::vector<TensorRecord> read_container(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace mixq

#endif  // MIXQ_CONTAINER_HPP_
