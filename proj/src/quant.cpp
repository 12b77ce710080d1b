// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/quant.hpp"

#include <cmath>
#include <string>

#include "quantkit/error.hpp"

namespace quantkit {

namespace {

void check_bit_width(int bit_width) {
  require(bit_width >= 2 && bit_width <= 8, ErrorCode::InvalidArgument,
          "bit_width must be in [2, 8], got " + std::to_string(bit_width));
}

double levels(int bit_width) { return std::ldexp(1.0, bit_width) - 1.0; }  // 2^b - 1
double half_levels(int bit_width) { return std::ldexp(1.0, bit_width - 1) - 1.0; }

}  // namespace

void RangeSpec::validate() const {
  require(std::isfinite(beta) && std::isfinite(alpha), ErrorCode::InvalidArgument,
          "range bounds must be finite");
  if (alpha == beta) fail(ErrorCode::DegenerateInput, "empty range");
  require(beta < alpha, ErrorCode::InvalidArgument, "range requires beta < alpha");
}

std::int32_t QuantParams::qmin() const {
  const std::int32_t full_min = -(1 << (bit_width - 1));
  return scheme == Scheme::Scale ? full_min + 1 : full_min;
}

std::int32_t QuantParams::qmax() const { return (1 << (bit_width - 1)) - 1; }

void QuantParams::validate() const {
  check_bit_width(bit_width);
  require(!scales.empty() && scales.size() == zero_points.size(),
          ErrorCode::InvalidArgument, "params must carry one (scale, zero_point) per slice");
  require(axis == kPerTensor || axis >= 0, ErrorCode::InvalidArgument, "bad axis");
  require(axis != kPerTensor || scales.size() == 1, ErrorCode::InvalidArgument,
          "per-tensor params must have exactly one slice");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    require(std::isfinite(scales[i]) && scales[i] > 0.0, ErrorCode::InvalidArgument,
            "scale must be positive and finite");
    if (scheme == Scheme::Scale) {
      require(zero_points[i] == 0, ErrorCode::InvalidArgument,
              "scale scheme requires zero_point == 0");
    } else {
      require(zero_points[i] >= qmin() && zero_points[i] <= qmax(),
              ErrorCode::InvalidArgument, "zero_point outside integer range");
    }
  }
}

double round_half_away(double x) { return std::round(x); }

double clip(double x, double lo, double hi) {
  if (x < lo) return lo;
  if (x > hi) return hi;
  return x;
}

QuantParams affine_params(const RangeSpec& range, int bit_width) {
  range.validate();
  check_bit_width(bit_width);
  require(range.beta <= 0.0 && range.alpha >= 0.0, ErrorCode::InvalidArgument,
          "affine range must contain zero");
  QuantParams params;
  params.scheme = Scheme::Affine;
  params.bit_width = bit_width;
  const double s = levels(bit_width) / (range.alpha - range.beta);
  const double z = -round_half_away(range.beta * s) - std::ldexp(1.0, bit_width - 1);
  params.scales = {s};
  params.zero_points = {static_cast<std::int32_t>(z)};
  params.validate();
  return params;
}

QuantParams scale_params(double alpha, int bit_width) {
  check_bit_width(bit_width);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail(ErrorCode::DegenerateInput, "non-positive range");
  }
  QuantParams params;
  params.scheme = Scheme::Scale;
  params.bit_width = bit_width;
  params.scales = {half_levels(bit_width) / alpha};
  params.zero_points = {0};
  params.validate();
  return params;
}

QuantParams affine_params_per_axis(std::span<const RangeSpec> ranges, int bit_width, int axis) {
  require(!ranges.empty() && axis >= 0, ErrorCode::InvalidArgument,
          "per-axis params need an axis and at least one range");
  QuantParams params;
  for (const RangeSpec& r : ranges) {
    QuantParams p = affine_params(r, bit_width);
    params.scales.push_back(p.scale());
    params.zero_points.push_back(p.zero_point());
  }
  params.scheme = Scheme::Affine;
  params.bit_width = bit_width;
  params.axis = axis;
  return params;
}

QuantParams scale_params_per_axis(std::span<const double> alphas, int bit_width, int axis) {
  require(!alphas.empty() && axis >= 0, ErrorCode::InvalidArgument,
          "per-axis params need an axis and at least one alpha");
  QuantParams params;
  for (double alpha : alphas) {
    params.scales.push_back(scale_params(alpha, bit_width).scale());
    params.zero_points.push_back(0);
  }
  params.scheme = Scheme::Scale;
  params.bit_width = bit_width;
  params.axis = axis;
  return params;
}

RangeSpec params_range(const QuantParams& params, std::size_t slice) {
  const double s = params.scales[slice];
  const double z = params.zero_points[slice];
  return {(params.qmin() - z) / s, (params.qmax() - z) / s};
}

std::size_t slice_of_index(const Shape& shape, int axis, std::size_t flat_index) {
  if (axis == QuantParams::kPerTensor) return 0;
  std::size_t stride = 1;
  for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < shape.size(); ++d) {
    stride *= shape[d];
  }
  return (flat_index / stride) % shape[static_cast<std::size_t>(axis)];
}

namespace {

void check_axis(const QuantParams& params, const Shape& shape) {
  if (params.per_tensor()) return;
  require(static_cast<std::size_t>(params.axis) < shape.size(), ErrorCode::ShapeMismatch,
          "quantization axis out of range for shape " + shape_to_string(shape));
  require(params.num_slices() == shape[static_cast<std::size_t>(params.axis)],
          ErrorCode::ShapeMismatch,
          "per-axis params carry " + std::to_string(params.num_slices()) +
              " slices for axis extent " +
              std::to_string(shape[static_cast<std::size_t>(params.axis)]));
}

}  // namespace

QuantizedTensor quantize(const Tensor& x, const QuantParams& params) {
  params.validate();
  check_axis(params, x.shape());
  QuantizedTensor out;
  out.shape = x.shape();
  out.params = params;
  out.data.resize(x.size());
  const double lo = params.qmin();
  const double hi = params.qmax();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t slice = slice_of_index(x.shape(), params.axis, i);
    const double mapped = params.scales[slice] * x[i] + params.zero_points[slice];
    out.data[i] = static_cast<std::int8_t>(clip(round_half_away(mapped), lo, hi));
  }
  return out;
}

Tensor dequantize(const QuantizedTensor& xq) {
  xq.params.validate();
  check_axis(xq.params, xq.shape);
  Tensor out(xq.shape);
  for (std::size_t i = 0; i < xq.size(); ++i) {
    const std::size_t slice = slice_of_index(xq.shape, xq.params.axis, i);
    out[i] = (static_cast<double>(xq.data[i]) - xq.params.zero_points[slice]) /
             xq.params.scales[slice];
  }
  return out;
}

Tensor fake_quantize(const Tensor& x, const QuantParams& params) {
  return dequantize(quantize(x, params));
}

double fake_quantize_value(double x, const QuantParams& params, std::size_t slice) {
  const double s = params.scales[slice];
  const double z = params.zero_points[slice];
  const double q = clip(round_half_away(s * x + z), params.qmin(), params.qmax());
  return (q - z) / s;
}

}  // namespace quantkit
