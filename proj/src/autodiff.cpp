// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/autodiff.hpp"

#include <cmath>

#include "quantkit/activations.hpp"
#include "quantkit/error.hpp"

namespace quantkit {

Tensor ste_mask(const Tensor& x, const QuantParams& params) {
  params.validate();
  Tensor mask(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t slice = slice_of_index(x.shape(), params.axis, i);
    const RangeSpec range = params_range(params, slice);
    mask[i] = (x[i] >= range.beta && x[i] <= range.alpha) ? 1.0 : 0.0;
  }
  return mask;
}

Tensor clip_to_range(const Tensor& x, const QuantParams& params) {
  params.validate();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t slice = slice_of_index(x.shape(), params.axis, i);
    const RangeSpec range = params_range(params, slice);
    out[i] = clip(x[i], range.beta, range.alpha);
  }
  return out;
}

DualTensor fake_quant_forward_backward(const DualTensor& x, const QuantParams& params) {
  DualTensor out;
  out.value = fake_quantize(x.value, params);
  const Tensor mask = ste_mask(x.value, params);
  out.gradient = Tensor(x.gradient.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.gradient[i] = x.gradient[i] * mask[i];
  }
  return out;
}

double pact_range_gradient(const Tensor& x, double alpha, const Tensor& upstream) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "alpha must be positive");
  require(x.same_shape(upstream), ErrorCode::ShapeMismatch,
          "upstream gradient shape mismatch");
  double grad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > alpha) grad += upstream[i];
    else if (x[i] < -alpha) grad -= upstream[i];
  }
  return grad;
}

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                std::span<const std::int32_t> labels) {
  require(logits.rank() == 2 && logits.extent(0) == labels.size(),
          ErrorCode::ShapeMismatch, "logits rows must match labels");
  const std::size_t m = logits.extent(0);
  const std::size_t classes = logits.extent(1);
  const Tensor probs = softmax_rows(logits);
  double loss = 0.0;
  Tensor grad(logits.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const auto label = static_cast<std::size_t>(labels[i]);
    require(label < classes, ErrorCode::InvalidArgument, "label out of range");
    loss += -std::log(std::max(probs(i, label), 1e-300));
    for (std::size_t j = 0; j < classes; ++j) {
      grad(i, j) = (probs(i, j) - (j == label ? 1.0 : 0.0)) / static_cast<double>(m);
    }
  }
  return {loss / static_cast<double>(m), grad};
}

std::pair<double, Tensor> squared_error(const Tensor& out, const Tensor& target) {
  require(out.same_shape(target), ErrorCode::ShapeMismatch, "target shape mismatch");
  double loss = 0.0;
  Tensor grad(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double diff = out[i] - target[i];
    loss += 0.5 * diff * diff;
    grad[i] = diff;
  }
  return {loss, grad};
}

struct Backprop::Tape {
  Tensor input;          // activation entering the layer
  Tensor sim_input;      // after fake-quant / clip (quantized layers only)
  Tensor sim_weight;     // simulated weight matrix or kernel
  QuantParams act_params;
  QuantParams weight_params;
  bool simulated = false;
  Tensor patches;        // conv: im2col of sim_input
  Shape output_shape;
};

Backprop::Backprop(const Model& model, SimMode mode) : model_(model), mode_(mode) {}

QuantParams Backprop::activation_params_for(const Layer& layer, std::size_t index) const {
  if (alpha_overrides_ && index < alpha_overrides_->size() &&
      (*alpha_overrides_)[index] > 0.0) {
    return scale_params((*alpha_overrides_)[index], 8);
  }
  require(layer.quant.activation_params.has_value(), ErrorCode::MissingCalibration,
          "missing calibration for tensor '" + layer.input_tensor_name() + "'");
  return *layer.quant.activation_params;
}

Tensor Backprop::forward(const Tensor& x) {
  tapes_.assign(model_.layers.size(), Tape{});
  Tensor current = x;
  for (std::size_t i = 0; i < model_.layers.size(); ++i) {
    const Layer& layer = model_.layers[i];
    Tape& tape = tapes_[i];
    tape.input = current;

    if (simulate(layer)) {
      tape.simulated = true;
      tape.act_params = activation_params_for(layer, i);
      tape.weight_params = derive_weight_params(model_, layer);
      const Tensor& w = model_.weight(layer.weight_name);
      if (mode_ == SimMode::FakeQuant) {
        tape.sim_input = fake_quantize(current, tape.act_params);
        tape.sim_weight = fake_quantize(w, tape.weight_params);
      } else {
        tape.sim_input = clip_to_range(current, tape.act_params);
        tape.sim_weight = clip_to_range(w, tape.weight_params);
      }
      if (layer.kind == LayerKind::Linear) {
        current = real_matmul(tape.sim_input, tape.sim_weight);
        if (!layer.bias_name.empty()) {
          const Tensor& b = model_.weight(layer.bias_name);
          for (std::size_t r = 0; r < current.extent(0); ++r) {
            for (std::size_t c = 0; c < current.extent(1); ++c) current(r, c) += b[c];
          }
        }
      } else {
        tape.output_shape = conv2d_output_shape(tape.sim_input.shape(),
                                                tape.sim_weight.shape(), layer.conv);
        tape.patches = im2col(tape.sim_input, tape.sim_weight.shape(), layer.conv);
        current = conv2d_im2col(tape.sim_input, tape.sim_weight, layer.conv);
        if (!layer.bias_name.empty()) {
          const Tensor& b = model_.weight(layer.bias_name);
          for (std::size_t n = 0; n < current.extent(0); ++n) {
            for (std::size_t c = 0; c < current.extent(1); ++c) {
              for (std::size_t h = 0; h < current.extent(2); ++h) {
                for (std::size_t ww = 0; ww < current.extent(3); ++ww) {
                  current(n, c, h, ww) += b[c];
                }
              }
            }
          }
        }
      }
      continue;
    }

    current = apply_layer_fp32(model_, layer, current);
    tape.output_shape = current.shape();
  }
  return current;
}

namespace {

// Gradient of conv output w.r.t. patches scattered back to input positions.
Tensor col2im(const Tensor& d_patches, const Shape& input_shape, const Shape& kernel,
              const Conv2dSpec& spec, const Shape& out_shape) {
  Tensor dx(input_shape);
  const std::size_t kc = kernel[1], kh = kernel[2], kw = kernel[3];
  const std::size_t oh = out_shape[2], ow = out_shape[3];
  std::size_t row = 0;
  for (std::size_t n = 0; n < input_shape[0]; ++n) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++row) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < kc; ++c) {
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx_k = 0; dx_k < kw; ++dx_k, ++col) {
              const std::ptrdiff_t src_y =
                  static_cast<std::ptrdiff_t>(y * spec.stride + dy) -
                  static_cast<std::ptrdiff_t>(spec.padding);
              const std::ptrdiff_t src_x =
                  static_cast<std::ptrdiff_t>(x * spec.stride + dx_k) -
                  static_cast<std::ptrdiff_t>(spec.padding);
              if (src_y < 0 || src_x < 0 ||
                  src_y >= static_cast<std::ptrdiff_t>(input_shape[2]) ||
                  src_x >= static_cast<std::ptrdiff_t>(input_shape[3])) {
                continue;
              }
              dx(n, c, static_cast<std::size_t>(src_y), static_cast<std::size_t>(src_x)) +=
                  d_patches(row, col);
            }
          }
        }
      }
    }
  }
  return dx;
}

Tensor transpose2d(const Tensor& a) {
  Tensor t({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    for (std::size_t j = 0; j < a.extent(1); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Tensor grad_as_matrix(const Tensor& g_nchw) {
  // NCHW gradient -> (N*OH*OW) x O, matching the patch-matrix layout.
  const std::size_t n = g_nchw.extent(0), o = g_nchw.extent(1);
  const std::size_t oh = g_nchw.extent(2), ow = g_nchw.extent(3);
  Tensor g({n * oh * ow, o});
  std::size_t row = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++row) {
        for (std::size_t j = 0; j < o; ++j) g(row, j) = g_nchw(b, j, y, x);
      }
    }
  }
  return g;
}

Tensor kernel_grad_from_matrix(const Tensor& dw_mat, const Shape& kernel_shape) {
  Tensor dk(kernel_shape);
  const std::size_t o = kernel_shape[0], i = kernel_shape[1];
  const std::size_t kh = kernel_shape[2], kw = kernel_shape[3];
  for (std::size_t oc = 0; oc < o; ++oc) {
    std::size_t r = 0;
    for (std::size_t ic = 0; ic < i; ++ic) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t x = 0; x < kw; ++x, ++r) dk(oc, ic, y, x) = dw_mat(r, oc);
      }
    }
  }
  return dk;
}

Tensor kernel_as_matrix_local(const Tensor& kernel) {
  const std::size_t o = kernel.extent(0), i = kernel.extent(1);
  const std::size_t kh = kernel.extent(2), kw = kernel.extent(3);
  Tensor w({i * kh * kw, o});
  for (std::size_t oc = 0; oc < o; ++oc) {
    std::size_t r = 0;
    for (std::size_t ic = 0; ic < i; ++ic) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t x = 0; x < kw; ++x, ++r) w(r, oc) = kernel(oc, ic, y, x);
      }
    }
  }
  return w;
}

void accumulate(std::map<std::string, Tensor>& grads, const std::string& name,
                Tensor value) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    grads.emplace(name, std::move(value));
  } else {
    for (std::size_t i = 0; i < value.size(); ++i) it->second[i] += value[i];
  }
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

Backprop::Gradients Backprop::backward(const Tensor& output_gradient) {
  require(tapes_.size() == model_.layers.size(), ErrorCode::InvalidArgument,
          "backward without a forward pass");
  Gradients grads;
  grads.alphas.assign(model_.layers.size(), 0.0);
  Tensor g = output_gradient;

  for (std::size_t idx = model_.layers.size(); idx-- > 0;) {
    const Layer& layer = model_.layers[idx];
    const Tape& tape = tapes_[idx];

    switch (layer.kind) {
      case LayerKind::Linear: {
        const Tensor& x_used = tape.simulated ? tape.sim_input : tape.input;
        const Tensor& w_used =
            tape.simulated ? tape.sim_weight : model_.weight(layer.weight_name);
        if (!layer.bias_name.empty()) {
          Tensor db({g.extent(1)});
          for (std::size_t r = 0; r < g.extent(0); ++r) {
            for (std::size_t c = 0; c < g.extent(1); ++c) db[c] += g(r, c);
          }
          accumulate(grads.params, layer.bias_name, std::move(db));
        }
        Tensor dw = real_matmul(transpose2d(x_used), g);
        Tensor dx = real_matmul(g, transpose2d(w_used));
        if (tape.simulated) {
          dw = hadamard(dw, ste_mask(model_.weight(layer.weight_name), tape.weight_params));
          const double alpha = params_range(tape.act_params).alpha;
          grads.alphas[idx] = pact_range_gradient(tape.input, alpha, dx);
          dx = hadamard(dx, ste_mask(tape.input, tape.act_params));
        }
        accumulate(grads.params, layer.weight_name, std::move(dw));
        g = std::move(dx);
        break;
      }
      case LayerKind::Conv2d: {
        const Tensor& kernel = model_.weight(layer.weight_name);
        const Tensor& x_used = tape.simulated ? tape.sim_input : tape.input;
        const Tensor k_used = tape.simulated ? tape.sim_weight : kernel;
        if (!layer.bias_name.empty()) {
          Tensor db({g.extent(1)});
          for (std::size_t n = 0; n < g.extent(0); ++n) {
            for (std::size_t c = 0; c < g.extent(1); ++c) {
              for (std::size_t h = 0; h < g.extent(2); ++h) {
                for (std::size_t w = 0; w < g.extent(3); ++w) db[c] += g(n, c, h, w);
              }
            }
          }
          accumulate(grads.params, layer.bias_name, std::move(db));
        }
        Tensor patches_local;
        const Tensor* patches = &tape.patches;
        if (!tape.simulated || tape.patches.size() == 0) {
          patches_local = im2col(x_used, k_used.shape(), layer.conv);
          patches = &patches_local;
        }
        const Tensor g_mat = grad_as_matrix(g);
        Tensor dw = kernel_grad_from_matrix(real_matmul(transpose2d(*patches), g_mat),
                                            k_used.shape());
        const Tensor d_patches = real_matmul(g_mat, transpose2d(kernel_as_matrix_local(k_used)));
        Tensor dx = col2im(d_patches, x_used.shape(), k_used.shape(), layer.conv, g.shape());
        if (tape.simulated) {
          dw = hadamard(dw, ste_mask(kernel, tape.weight_params));
          const double alpha = params_range(tape.act_params).alpha;
          grads.alphas[idx] = pact_range_gradient(tape.input, alpha, dx);
          dx = hadamard(dx, ste_mask(tape.input, tape.act_params));
        }
        accumulate(grads.params, layer.weight_name, std::move(dw));
        g = std::move(dx);
        break;
      }
      case LayerKind::BatchNorm: {
        // Inference-time BN is a fixed per-channel affine; its parameters
        // stay frozen during fine-tuning.
        const auto& x = tape.input;
        const Tensor& gamma = model_.weight(layer.gamma_name);
        const Tensor& var = model_.weight(layer.var_name);
        Tensor dx(x.shape());
        if (x.rank() == 4) {
          for (std::size_t n = 0; n < x.extent(0); ++n) {
            for (std::size_t c = 0; c < x.extent(1); ++c) {
              const double scale = gamma[c] / std::sqrt(var[c] + layer.epsilon);
              for (std::size_t h = 0; h < x.extent(2); ++h) {
                for (std::size_t w = 0; w < x.extent(3); ++w) {
                  dx(n, c, h, w) = scale * g(n, c, h, w);
                }
              }
            }
          }
        } else {
          for (std::size_t i = 0; i < x.extent(0); ++i) {
            for (std::size_t j = 0; j < x.extent(1); ++j) {
              dx(i, j) = gamma[j] / std::sqrt(var[j] + layer.epsilon) * g(i, j);
            }
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::ReLU: {
        Tensor dx(tape.input.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) {
          dx[i] = tape.input[i] > 0.0 ? g[i] : 0.0;
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::GELU: {
        Tensor dx(tape.input.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) {
          dx[i] = gelu_derivative(tape.input[i]) * g[i];
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::Swish: {
        Tensor dx(tape.input.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) {
          dx[i] = swish_derivative(tape.input[i]) * g[i];
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::ClippedGELU: {
        Tensor dx(tape.input.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) {
          const double v = tape.input[i];
          dx[i] = gelu_value(v) < layer.clip_limit ? gelu_derivative(v) * g[i] : 0.0;
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::Softmax: {
        const Tensor y = softmax_rows(tape.input);
        Tensor dx(y.shape());
        for (std::size_t i = 0; i < y.extent(0); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < y.extent(1); ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.extent(1); ++j) {
            dx(i, j) = y(i, j) * (g(i, j) - dot);
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::Flatten: {
        g = g.reshaped(tape.input.shape());
        break;
      }
    }
  }
  grads.input = std::move(g);
  return grads;
}

double loss_at(const Model& model, const Tensor& input, const Tensor& target,
               SimMode mode) {
  Backprop engine(model, mode);
  const Tensor out = engine.forward(input);
  return squared_error(out, target).first;
}

GradCheckReport grad_check(const Model& model, const Tensor& input, const Tensor& target,
                           double epsilon) {
  require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
  Backprop engine(model, SimMode::FakeQuant);
  const Tensor out = engine.forward(input);
  auto [loss, d_out] = squared_error(out, target);
  (void)loss;
  const Backprop::Gradients analytic = engine.backward(d_out);

  GradCheckReport report;
  Model probe = model;
  for (const auto& [name, grad] : analytic.params) {
    Tensor& w = probe.weight(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + epsilon;
      const double up = loss_at(probe, input, target, SimMode::ClipOnly);
      w[i] = saved - epsilon;
      const double down = loss_at(probe, input, target, SimMode::ClipOnly);
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double abs_err = std::abs(numeric - grad[i]);
      const double rel_err =
          abs_err / std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      report.max_rel_error = std::max(report.max_rel_error, rel_err);
    }
  }
  return report;
}

}  // namespace quantkit
