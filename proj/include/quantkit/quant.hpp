// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Range mapping between real values and b-bit signed integers.
//
// Two uniform schemes are supported:
//   affine: x_q = clip(round(s*x + z), -2^(b-1),   2^(b-1)-1)
//   scale:  x_q = clip(round(s*x),     -2^(b-1)+1, 2^(b-1)-1)
// round() is round-half-away-from-zero everywhere, and all intermediate
// arithmetic runs in 64-bit precision so results are reproducible.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quantkit/tensor.hpp"

namespace quantkit {

enum class Scheme { Affine, Scale };

// Representable real range [beta, alpha] chosen by calibration.
struct RangeSpec {
  double beta = 0.0;
  double alpha = 0.0;

  static RangeSpec symmetric(double alpha) { return {-alpha, alpha}; }

  bool is_symmetric() const { return beta == -alpha && alpha > 0.0; }
  void validate() const;  // beta < alpha, both finite
};

// Quantization parameters for one tensor: scheme, bit width and one
// (scale, zero_point) pair per slice. Per-tensor params have a single
// pair; per-axis params have one per slice along `axis`.
struct QuantParams {
  static constexpr int kPerTensor = -1;

  Scheme scheme = Scheme::Scale;
  int bit_width = 8;
  int axis = kPerTensor;
  std::vector<double> scales;
  std::vector<std::int32_t> zero_points;

  bool per_tensor() const { return axis == kPerTensor; }
  std::size_t num_slices() const { return scales.size(); }

  double scale() const { return scales[0]; }
  std::int32_t zero_point() const { return zero_points[0]; }

  // Integer clip bounds (Scale drops -2^(b-1) in favor of symmetry).
  std::int32_t qmin() const;
  std::int32_t qmax() const;

  void validate() const;
};

// Quantized tensor: b-bit signed integers stored in int8 plus the params
// that map them back to real values.
struct QuantizedTensor {
  Shape shape;
  std::vector<std::int8_t> data;
  QuantParams params;

  std::size_t size() const { return data.size(); }
};

double round_half_away(double x);
double clip(double x, double lo, double hi);

// s = (2^b - 1)/(alpha - beta), z = -round(beta*s) - 2^(b-1). The range must
// contain zero so that z is an exact in-range integer and real zero is
// exactly representable.
QuantParams affine_params(const RangeSpec& range, int bit_width);

// s = (2^(b-1) - 1)/alpha with the symmetric integer range and z = 0.
QuantParams scale_params(double alpha, int bit_width);

QuantParams affine_params_per_axis(std::span<const RangeSpec> ranges, int bit_width, int axis);
QuantParams scale_params_per_axis(std::span<const double> alphas, int bit_width, int axis);

// Real bounds [beta, alpha] implied by one slice of the params; the STE
// backward mask and the clip surrogate both use these.
RangeSpec params_range(const QuantParams& params, std::size_t slice = 0);

QuantizedTensor quantize(const Tensor& x, const QuantParams& params);
Tensor dequantize(const QuantizedTensor& xq);

// dequantize(quantize(x)): snaps x onto the representable grid.
Tensor fake_quantize(const Tensor& x, const QuantParams& params);

double fake_quantize_value(double x, const QuantParams& params, std::size_t slice = 0);

// Index of the (scale, zero_point) slice that element `flat_index` of a
// tensor with `shape` belongs to.
std::size_t slice_of_index(const Shape& shape, int axis, std::size_t flat_index);

}  // namespace quantkit
