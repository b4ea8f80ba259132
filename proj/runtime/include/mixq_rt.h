/*
 * Copyright 2026 The mixq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * Native kernel runtime interface consumed by generated model code.
 *
 * Arithmetic contracts match the C++ core bit for bit:
 *   - quantization: symmetric per-tensor; bits >= 2 use
 *     scale = max|x| / (2^(b-1)-1) and half-away-from-zero rounding with
 *     clamping; 1-bit uses scale = mean|x| and sign (x >= 0 -> +1);
 *     an all-zero tensor gets scale 1.
 *   - packing: element i occupies bits [(i*b) % 32, +b) of word (i*b)/32
 *     of its row; rows start on word boundaries; 1-bit fields store +1
 *     as 0 and -1 as 1.
 *   - dot products: the ten (wide, narrow) operand pairs with
 *     wide in {8,4,2,1} and narrow <= wide; rs1 holds 32/wide lanes.
 *   - bias: round(b / (s_w * s_a)) in double, added to the int32
 *     accumulator; dequantization is (float)acc * (s_w * s_a).
 *
 * The runtime allocates nothing. All tensors live in caller-provided
 * memory, normally one static arena.
 */

#ifndef MIXQ_RT_H_
#define MIXQ_RT_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MIXQ_RT_CONTAINER_VERSION 1u
#define MIXQ_RT_MAX_RANK 4

typedef enum {
  MIXQ_RT_OK = 0,
  MIXQ_RT_ERR_MAGIC = 1,
  MIXQ_RT_ERR_VERSION = 2,
  MIXQ_RT_ERR_TRUNCATED = 3,
  MIXQ_RT_ERR_NOT_FOUND = 4,
  MIXQ_RT_ERR_ARENA = 5,
  MIXQ_RT_ERR_OVERFLOW = 6,
  MIXQ_RT_ERR_ARGUMENT = 7
} mixq_rt_status;

/* Container record roles. */
typedef enum {
  MIXQ_RT_ROLE_WEIGHT = 0,
  MIXQ_RT_ROLE_BIAS = 1,
  MIXQ_RT_ROLE_PACKED_WEIGHT = 2,
  MIXQ_RT_ROLE_INT_BIAS = 3,
  MIXQ_RT_ROLE_DATASET = 4,
  MIXQ_RT_ROLE_INPUT = 5
} mixq_rt_role;

/* View of one record inside a loaded container. `data` points into the
 * caller's buffer and is not necessarily aligned. */
typedef struct {
  uint32_t layer;
  uint8_t role;
  uint8_t rank;
  uint32_t dims[MIXQ_RT_MAX_RANK];
  uint8_t bits;  /* packed and int-bias roles only */
  float scale;   /* packed and int-bias roles only */
  const uint8_t* data;
  size_t bytes;
} mixq_rt_record;

typedef struct {
  const uint8_t* base;
  size_t size;
  uint32_t count;
} mixq_rt_container;

/* A tensor inside the arena. `data` points at int32, float or packed
 * uint32 words depending on the producing call. */
typedef struct {
  void* data;
  uint32_t dims[MIXQ_RT_MAX_RANK];
  uint8_t rank;
  uint8_t bits;
  float scale;
} mixq_rt_tensor;

/* Validates magic, version and every record header of a container. */
mixq_rt_status mixq_rt_load_weights(const uint8_t* bytes, size_t size,
                                    mixq_rt_container* out);
mixq_rt_status mixq_rt_find(const mixq_rt_container* c, uint32_t layer,
                            uint8_t role, mixq_rt_record* out);
/* Copies a record payload to aligned memory. */
void mixq_rt_copy(const mixq_rt_record* rec, void* dst);

int32_t mixq_rt_dotp(int bits_wide, int bits_narrow, uint32_t rs1,
                     uint32_t rs2);

float mixq_rt_compute_scale(const float* x, size_t n, int bits);
void mixq_rt_quantize(const float* x, size_t n, float scale, int bits,
                      int32_t* q);
void mixq_rt_dequantize(const int32_t* q, size_t n, float scale, float* x);

/* Packs a [rows, cols] matrix, zero-padding (+1 for 1-bit) each row to
 * padded_cols elements. */
void mixq_rt_pack(const int32_t* m, size_t rows, size_t cols, int bits,
                  size_t padded_cols, uint32_t* out);
void mixq_rt_unpack(const uint32_t* words, size_t rows, size_t cols,
                    int bits, size_t padded_cols, int32_t* out);

/* [C, H, W] -> [OH*OW, C*kh*kw] patches in (c, ky, kx) order. */
void mixq_rt_im2col(const int32_t* in, size_t c, size_t h, size_t w,
                    size_t kh, size_t kw, size_t stride, size_t pad,
                    int32_t pad_value, int32_t* out);

/* out = act[M, K] x weight[N, K]^T over packed rows of padded_k elements.
 * channel_major selects an [N, M] output layout instead of [M, N]. */
mixq_rt_status mixq_rt_matmul(const uint32_t* act, const uint32_t* weight,
                              size_t m, size_t n, size_t k, size_t padded_k,
                              int act_bits, int weight_bits,
                              int channel_major, int32_t* out);

/* acc += round(bias / acc_scale) per channel; then, when x is non-null,
 * x = (float)acc * acc_scale followed by ReLU if requested. */
mixq_rt_status mixq_rt_bias_dequant(int32_t* acc, size_t m, size_t n,
                                    int channel_major, const float* bias,
                                    float acc_scale, int relu, float* x);

#ifdef __cplusplus
}
#endif

#endif /* MIXQ_RT_H_ */
