// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "quantkit/error.hpp"

namespace quantkit {

void QLinearWeights::validate() const {
  require(rows > 0 && cols > 0 && data.size() == rows * cols, ErrorCode::ShapeMismatch,
          "weight matrix data does not match its dimensions");
  require(col_scales.size() == 1 || col_scales.size() == cols, ErrorCode::ShapeMismatch,
          "weights need one scale per column or a single per-tensor scale");
  for (double s : col_scales) {
    require(std::isfinite(s) && s > 0.0, ErrorCode::InvalidArgument,
            "weight scales must be positive");
  }
  require(zero_points.empty() || zero_points.size() == col_scales.size(),
          ErrorCode::ShapeMismatch, "zero points must match scales");
}

namespace {

QLinearWeights quantize_weights(const Tensor& w, int bit_width, bool per_column) {
  require(w.rank() == 2, ErrorCode::ShapeMismatch, "weights must be 2-D");
  const std::size_t p = w.extent(0);
  const std::size_t n = w.extent(1);
  QLinearWeights out;
  out.rows = p;
  out.cols = n;
  out.data.resize(p * n);

  const std::size_t slices = per_column ? n : 1;
  std::vector<double> alphas(slices, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t s = per_column ? j : 0;
      alphas[s] = std::max(alphas[s], std::abs(w(k, j)));
    }
  }
  out.col_scales.resize(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    // An all-zero column carries no information; unit scale keeps it exact.
    out.col_scales[s] =
        alphas[s] > 0.0 ? scale_params(alphas[s], bit_width).scale() : 1.0;
  }

  const double qmax = (1 << (bit_width - 1)) - 1;
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = out.col_scales[per_column ? j : 0];
      out.data[k * n + j] =
          static_cast<std::int8_t>(clip(round_half_away(s * w(k, j)), -qmax, qmax));
    }
  }
  return out;
}

void check_matmul_operands(const QuantizedTensor& xq, const QLinearWeights& wq) {
  wq.validate();
  require(xq.shape.size() == 2, ErrorCode::ShapeMismatch, "activations must be 2-D");
  require(xq.shape[1] == wq.rows, ErrorCode::ShapeMismatch,
          "inner dimensions disagree: " + shape_to_string(xq.shape) + " x " +
              std::to_string(wq.rows) + "x" + std::to_string(wq.cols));
}

}  // namespace

QLinearWeights quantize_weights_per_column(const Tensor& w, int bit_width) {
  return quantize_weights(w, bit_width, true);
}

QLinearWeights quantize_weights_per_tensor(const Tensor& w, int bit_width) {
  return quantize_weights(w, bit_width, false);
}

Tensor matmul_dequant_reference(const QuantizedTensor& xq, const QLinearWeights& wq) {
  check_matmul_operands(xq, wq);
  const std::size_t m = xq.shape[0];
  const std::size_t p = xq.shape[1];
  const std::size_t n = wq.cols;

  Tensor x = dequantize(xq);
  Tensor w({p, n});
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      w(k, j) = (static_cast<double>(wq.at(k, j)) - wq.zero_point(j)) / wq.scale(j);
    }
  }

  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += x(i, k) * w(k, j);
      y(i, j) = acc;
    }
  }
  return y;
}

Tensor matmul_dequant_reference_per_element(
    const std::vector<std::int8_t>& xq, const Tensor& x_scales,
    const std::vector<std::int8_t>& wq, const Tensor& w_scales,
    std::size_t m, std::size_t p, std::size_t n) {
  require(xq.size() == m * p && wq.size() == p * n, ErrorCode::ShapeMismatch,
          "operand sizes disagree");
  require(x_scales.size() == m * p && w_scales.size() == p * n, ErrorCode::ShapeMismatch,
          "per-element scale sizes disagree");
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        const double xv = xq[i * p + k] / x_scales[i * p + k];
        const double wv = wq[k * n + j] / w_scales[k * n + j];
        acc += xv * wv;
      }
      y(i, j) = acc;
    }
  }
  return y;
}

Tensor integer_matmul_scale(const QuantizedTensor& xq, const QLinearWeights& wq,
                            MatmulOpCount* op_count) {
  check_matmul_operands(xq, wq);
  require(xq.params.scheme == Scheme::Scale && xq.params.per_tensor(),
          ErrorCode::InvalidArgument,
          "integer matmul requires a per-tensor activation scale");
  require(!wq.affine(), ErrorCode::InvalidArgument,
          "integer_matmul_scale takes scale-scheme weights");
  const std::size_t m = xq.shape[0];
  const std::size_t p = xq.shape[1];
  const std::size_t n = wq.cols;
  require(p <= kMaxInnerDim, ErrorCode::InvalidArgument, "inner dimension too large");

  const double s_x = xq.params.scale();
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::int32_t acc = 0;
      for (std::size_t k = 0; k < p; ++k) {
        acc += static_cast<std::int32_t>(xq.data[i * p + k]) *
               static_cast<std::int32_t>(wq.at(k, j));
      }
      y(i, j) = static_cast<double>(acc) / (s_x * wq.scale(j));
    }
  }
  if (op_count) {
    op_count->term1_int_macs += static_cast<std::uint64_t>(m) * n * p;
    op_count->real_multiplies += static_cast<std::uint64_t>(m) * n;
  }
  return y;
}

AffineOfflineTerm affine_offline_term(const QLinearWeights& wq, std::int32_t z_x) {
  wq.validate();
  require(wq.rows <= kMaxInnerDim, ErrorCode::InvalidArgument, "inner dimension too large");
  AffineOfflineTerm term;
  term.z_x = z_x;
  term.per_column.resize(wq.cols);
  for (std::size_t j = 0; j < wq.cols; ++j) {
    std::int32_t acc = 0;
    for (std::size_t k = 0; k < wq.rows; ++k) {
      acc += static_cast<std::int32_t>(wq.at(k, j)) * z_x + z_x * wq.zero_point(j);
    }
    term.per_column[j] = acc;
  }
  return term;
}

Tensor integer_matmul_affine(const QuantizedTensor& xq, const QLinearWeights& wq,
                             const AffineOfflineTerm& offline, MatmulOpCount* op_count) {
  check_matmul_operands(xq, wq);
  require(xq.params.per_tensor(), ErrorCode::InvalidArgument,
          "affine matmul requires a per-tensor activation scale");
  require(offline.per_column.size() == wq.cols, ErrorCode::ShapeMismatch,
          "offline term does not match weight columns");
  require(offline.z_x == xq.params.zero_point(), ErrorCode::InvalidArgument,
          "offline term was built for a different activation zero point");
  const std::size_t m = xq.shape[0];
  const std::size_t p = xq.shape[1];
  const std::size_t n = wq.cols;
  require(p <= kMaxInnerDim, ErrorCode::InvalidArgument, "inner dimension too large");

  const double s_x = xq.params.scale();
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    // Term (3) depends on the activations, so it is recomputed online.
    std::int32_t row_sum = 0;
    for (std::size_t k = 0; k < p; ++k) {
      row_sum += static_cast<std::int32_t>(xq.data[i * p + k]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::int32_t acc = 0;
      for (std::size_t k = 0; k < p; ++k) {
        acc += static_cast<std::int32_t>(xq.data[i * p + k]) *
               static_cast<std::int32_t>(wq.at(k, j));
      }
      const std::int32_t term3 = row_sum * wq.zero_point(j);
      const std::int32_t integer_result = acc - offline.per_column[j] - term3;
      y(i, j) = static_cast<double>(integer_result) / (s_x * wq.scale(j));
    }
  }
  if (op_count) {
    op_count->term1_int_macs += static_cast<std::uint64_t>(m) * n * p;
    op_count->term2_offline_adds += static_cast<std::uint64_t>(m) * n;
    op_count->term3_int_macs += static_cast<std::uint64_t>(m) * p;
    op_count->real_multiplies += static_cast<std::uint64_t>(m) * n;
  }
  return y;
}

Tensor real_matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.extent(1) == b.extent(0),
          ErrorCode::ShapeMismatch,
          "matmul shapes disagree: " + shape_to_string(a.shape()) + " x " +
              shape_to_string(b.shape()));
  const std::size_t m = a.extent(0);
  const std::size_t p = a.extent(1);
  const std::size_t n = b.extent(1);
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      const double av = a(i, k);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) y(i, j) += av * b(k, j);
    }
  }
  return y;
}

Shape conv2d_output_shape(const Shape& input_nchw, const Shape& kernel_oihw,
                          const Conv2dSpec& spec) {
  require(input_nchw.size() == 4 && kernel_oihw.size() == 4, ErrorCode::ShapeMismatch,
          "conv2d expects NCHW input and OIHW kernel");
  require(input_nchw[1] == kernel_oihw[1], ErrorCode::ShapeMismatch,
          "conv2d channel mismatch");
  require(spec.stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
  const std::size_t padded_h = input_nchw[2] + 2 * spec.padding;
  const std::size_t padded_w = input_nchw[3] + 2 * spec.padding;
  require(kernel_oihw[2] <= padded_h && kernel_oihw[3] <= padded_w,
          ErrorCode::InvalidArgument, "kernel larger than padded input");
  const std::size_t oh = (padded_h - kernel_oihw[2]) / spec.stride + 1;
  const std::size_t ow = (padded_w - kernel_oihw[3]) / spec.stride + 1;
  return {input_nchw[0], kernel_oihw[0], oh, ow};
}

namespace {

// Shared patch-matrix walk; Fetch maps (n, c, h, w) to an element value and
// padding is implicit zero.
template <typename Fetch, typename Store>
void for_each_patch(const Shape& in, const Shape& kernel, const Conv2dSpec& spec,
                    const Shape& out, Fetch fetch, Store store) {
  const std::size_t kc = kernel[1], kh = kernel[2], kw = kernel[3];
  const std::size_t oh = out[2], ow = out[3];
  std::size_t row = 0;
  for (std::size_t n = 0; n < in[0]; ++n) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++row) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < kc; ++c) {
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx, ++col) {
              const std::ptrdiff_t src_y =
                  static_cast<std::ptrdiff_t>(y * spec.stride + dy) -
                  static_cast<std::ptrdiff_t>(spec.padding);
              const std::ptrdiff_t src_x =
                  static_cast<std::ptrdiff_t>(x * spec.stride + dx) -
                  static_cast<std::ptrdiff_t>(spec.padding);
              const bool inside = src_y >= 0 && src_x >= 0 &&
                                  src_y < static_cast<std::ptrdiff_t>(in[2]) &&
                                  src_x < static_cast<std::ptrdiff_t>(in[3]);
              store(row, col,
                    inside ? fetch(n, c, static_cast<std::size_t>(src_y),
                                   static_cast<std::size_t>(src_x))
                           : 0.0);
            }
          }
        }
      }
    }
  }
}

Tensor reshape_patches_to_nchw(const Tensor& y_mat, const Shape& out) {
  // y_mat rows run (n, oh, ow), columns are output channels.
  Tensor y(out);
  const std::size_t o = out[1], oh = out[2], ow = out[3];
  std::size_t row = 0;
  for (std::size_t n = 0; n < out[0]; ++n) {
    for (std::size_t yy = 0; yy < oh; ++yy) {
      for (std::size_t xx = 0; xx < ow; ++xx, ++row) {
        for (std::size_t j = 0; j < o; ++j) y(n, j, yy, xx) = y_mat(row, j);
      }
    }
  }
  return y;
}

Tensor kernel_as_matrix(const Tensor& kernel) {
  // OIHW -> (I*KH*KW) x O so output channels are columns.
  const std::size_t o = kernel.extent(0), i = kernel.extent(1);
  const std::size_t kh = kernel.extent(2), kw = kernel.extent(3);
  Tensor w({i * kh * kw, o});
  for (std::size_t oc = 0; oc < o; ++oc) {
    std::size_t r = 0;
    for (std::size_t ic = 0; ic < i; ++ic) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t x = 0; x < kw; ++x, ++r) {
          w(r, oc) = kernel(oc, ic, y, x);
        }
      }
    }
  }
  return w;
}

}  // namespace

Tensor im2col(const Tensor& input, const Shape& kernel, const Conv2dSpec& spec) {
  const Shape out = conv2d_output_shape(input.shape(), kernel, spec);
  const std::size_t rows = out[0] * out[2] * out[3];
  const std::size_t cols = kernel[1] * kernel[2] * kernel[3];
  Tensor patches({rows, cols});
  for_each_patch(
      input.shape(), kernel, spec, out,
      [&](std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return input(n, c, h, w);
      },
      [&](std::size_t r, std::size_t c, double v) { patches(r, c) = v; });
  return patches;
}

Tensor conv2d_im2col(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec) {
  const Shape out = conv2d_output_shape(input.shape(), kernel.shape(), spec);
  const Tensor patches = im2col(input, kernel.shape(), spec);
  const Tensor y_mat = real_matmul(patches, kernel_as_matrix(kernel));
  return reshape_patches_to_nchw(y_mat, out);
}

Tensor conv2d_im2col_quantized(const QuantizedTensor& input, const Tensor& kernel,
                               const Conv2dSpec& spec, int weight_bit_width,
                               bool per_channel_weights) {
  require(input.params.scheme == Scheme::Scale && input.params.per_tensor(),
          ErrorCode::InvalidArgument,
          "quantized conv2d requires a per-tensor scale-quantized input");
  const Shape out = conv2d_output_shape(input.shape, kernel.shape(), spec);
  const std::size_t rows = out[0] * out[2] * out[3];
  const std::size_t cols = kernel.extent(1) * kernel.extent(2) * kernel.extent(3);
  require(cols <= kMaxInnerDim, ErrorCode::InvalidArgument, "inner dimension too large");

  // int8 patch matrix; zero padding is exact because real zero maps to 0.
  QuantizedTensor patches;
  patches.shape = {rows, cols};
  patches.params = input.params;
  patches.data.resize(rows * cols);
  for_each_patch(
      input.shape, kernel.shape(), spec, out,
      [&](std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        const auto& s = input.shape;
        return static_cast<double>(
            input.data[((n * s[1] + c) * s[2] + h) * s[3] + w]);
      },
      [&](std::size_t r, std::size_t c, double v) {
        patches.data[r * cols + c] = static_cast<std::int8_t>(v);
      });

  const Tensor w_mat = kernel_as_matrix(kernel);
  const QLinearWeights wq = per_channel_weights
                                ? quantize_weights_per_column(w_mat, weight_bit_width)
                                : quantize_weights_per_tensor(w_mat, weight_bit_width);
  const Tensor y_mat = integer_matmul_scale(patches, wq);
  return reshape_patches_to_nchw(y_mat, out);
}

}  // namespace quantkit
