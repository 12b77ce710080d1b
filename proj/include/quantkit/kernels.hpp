// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Integer-domain matrix kernels. The products of int8 operands accumulate
// exactly in int32 (guarded for inner dimension <= 2^15) and the real scale
// factors are applied once per output column, so the factored kernels agree
// with the dequantize-then-multiply reference to floating-point rounding.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "quantkit/quant.hpp"
#include "quantkit/tensor.hpp"

namespace quantkit {

// Largest inner dimension for which |sum of p products of int8 values| is
// guaranteed below 2^31: p * 127 * 128 < 2^31 for p <= 2^15.
inline constexpr std::size_t kMaxInnerDim = std::size_t{1} << 15;

// Quantized weight matrix (p x n) with per-column or per-tensor scales.
// Zero points are only present on the affine demonstration path; the
// execution path keeps weights on the scale scheme.
struct QLinearWeights {
  std::size_t rows = 0;  // p
  std::size_t cols = 0;  // n
  std::vector<std::int8_t> data;      // row-major p x n
  std::vector<double> col_scales;     // n entries, or 1 for per-tensor
  std::vector<std::int32_t> zero_points;  // empty, or matching col_scales

  std::int8_t at(std::size_t k, std::size_t j) const { return data[k * cols + j]; }
  double scale(std::size_t j) const {
    return col_scales.size() == 1 ? col_scales[0] : col_scales[j];
  }
  std::int32_t zero_point(std::size_t j) const {
    if (zero_points.empty()) return 0;
    return zero_points.size() == 1 ? zero_points[0] : zero_points[j];
  }
  bool affine() const { return !zero_points.empty(); }
  void validate() const;
};

// Quantize a real (p x n) weight matrix on the scale scheme, one scale per
// output column (max calibration). Zero columns quantize exactly to zero
// with a unit scale.
QLinearWeights quantize_weights_per_column(const Tensor& w, int bit_width = 8);
QLinearWeights quantize_weights_per_tensor(const Tensor& w, int bit_width = 8);

// Per-output-column int32 term that depends only on the weights and zero
// points: sum_k (w_q[k][j]*z_x + z_x*z_w[j]). Computed offline.
struct AffineOfflineTerm {
  std::vector<std::int32_t> per_column;
  std::int32_t z_x = 0;
};

// Operation counts for one matmul call; term3 is the online overhead the
// affine scheme adds on top of the integer dot products.
struct MatmulOpCount {
  std::uint64_t term1_int_macs = 0;
  std::uint64_t term2_offline_adds = 0;
  std::uint64_t term3_int_macs = 0;
  std::uint64_t real_multiplies = 0;
};

// Ground-truth path: dequantize every element with its own scale, then
// multiply in 64-bit real arithmetic. Accepts arbitrary granularity via
// explicit per-element scale matrices.
Tensor matmul_dequant_reference(const QuantizedTensor& xq, const QLinearWeights& wq);
Tensor matmul_dequant_reference_per_element(
    const std::vector<std::int8_t>& xq, const Tensor& x_scales,
    const std::vector<std::int8_t>& wq, const Tensor& w_scales,
    std::size_t m, std::size_t p, std::size_t n);

// Factored integer kernel: int32 accumulation, then one real multiplier
// 1/(s_x*s_w[j]) per column. Requires a per-tensor activation scale.
Tensor integer_matmul_scale(const QuantizedTensor& xq, const QLinearWeights& wq,
                            MatmulOpCount* op_count = nullptr);

AffineOfflineTerm affine_offline_term(const QLinearWeights& wq, std::int32_t z_x);

// Three-term affine decomposition: term1 integer GEMM minus the offline
// term minus the online term sum_k x_q[i][k]*z_w[j], scaled per column.
Tensor integer_matmul_affine(const QuantizedTensor& xq, const QLinearWeights& wq,
                             const AffineOfflineTerm& offline,
                             MatmulOpCount* op_count = nullptr);

// Plain real matmul (m x p)·(p x n) in 64-bit arithmetic.
Tensor real_matmul(const Tensor& a, const Tensor& b);

struct Conv2dSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

Shape conv2d_output_shape(const Shape& input_nchw, const Shape& kernel_oihw,
                          const Conv2dSpec& spec);

// Patch matrix: (N*OH*OW) x (C*KH*KW) rows of the padded input.
Tensor im2col(const Tensor& input_nchw, const Shape& kernel_oihw, const Conv2dSpec& spec);

// Convolution lowered to matmul over the patch matrix.
Tensor conv2d_im2col(const Tensor& input_nchw, const Tensor& kernel_oihw,
                     const Conv2dSpec& spec);

// Quantized convolution: per-tensor scale-quantized input, per-output-channel
// weights, integer matmul over int8 patches.
Tensor conv2d_im2col_quantized(const QuantizedTensor& input_nchw,
                               const Tensor& kernel_oihw, const Conv2dSpec& spec,
                               int weight_bit_width = 8,
                               bool per_channel_weights = true);

}  // namespace quantkit
