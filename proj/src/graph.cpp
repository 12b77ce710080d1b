// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/graph.hpp"

#include <algorithm>
#include <cmath>

#include "quantkit/activations.hpp"
#include "quantkit/error.hpp"

namespace quantkit {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear: return "linear";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::BatchNorm: return "batch_norm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::GELU: return "gelu";
    case LayerKind::Swish: return "swish";
    case LayerKind::ClippedGELU: return "clipped_gelu";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Flatten: return "flatten";
  }
  return "linear";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "linear") return LayerKind::Linear;
  if (name == "conv2d") return LayerKind::Conv2d;
  if (name == "batch_norm") return LayerKind::BatchNorm;
  if (name == "relu") return LayerKind::ReLU;
  if (name == "gelu") return LayerKind::GELU;
  if (name == "swish") return LayerKind::Swish;
  if (name == "clipped_gelu") return LayerKind::ClippedGELU;
  if (name == "softmax") return LayerKind::Softmax;
  if (name == "flatten") return LayerKind::Flatten;
  fail(ErrorCode::Io, "unknown layer kind '" + name + "'");
}

const Tensor& Model::weight(const std::string& name) const {
  auto it = weights.find(name);
  require(it != weights.end(), ErrorCode::InvalidArgument,
          "unresolved weight tensor '" + name + "'");
  return it->second;
}

Tensor& Model::weight(const std::string& name) {
  auto it = weights.find(name);
  require(it != weights.end(), ErrorCode::InvalidArgument,
          "unresolved weight tensor '" + name + "'");
  return it->second;
}

Layer* Model::find_layer(const std::string& name) {
  for (Layer& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

const Layer* Model::find_layer(const std::string& name) const {
  for (const Layer& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

Shape layer_output_shape(const Layer& layer, const Shape& input) {
  switch (layer.kind) {
    case LayerKind::Linear:
      require(input.size() == 2 && input[1] == layer.in_features,
              ErrorCode::ShapeMismatch,
              "layer '" + layer.name + "': expected (m," +
                  std::to_string(layer.in_features) + "), got " +
                  shape_to_string(input));
      return {input[0], layer.out_features};
    case LayerKind::Conv2d:
      return conv2d_output_shape(
          input, {layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w},
          layer.conv);
    case LayerKind::BatchNorm: {
      const std::size_t ch = input.size() == 4 ? input[1] : input.back();
      require(ch == layer.channels, ErrorCode::ShapeMismatch,
              "layer '" + layer.name + "': channel mismatch");
      return input;
    }
    case LayerKind::Softmax:
      require(input.size() == 2, ErrorCode::ShapeMismatch,
              "layer '" + layer.name + "': softmax expects a 2-D tensor");
      return input;
    case LayerKind::Flatten: {
      require(!input.empty(), ErrorCode::ShapeMismatch, "flatten needs input");
      std::size_t flat = 1;
      for (std::size_t d = 1; d < input.size(); ++d) flat *= input[d];
      return {input[0], flat};
    }
    default:
      return input;
  }
}

void Model::validate() const {
  require(!input_shape.empty(), ErrorCode::InvalidArgument, "model needs an input shape");
  Shape shape;
  shape.push_back(1);  // synthetic batch
  shape.insert(shape.end(), input_shape.begin(), input_shape.end());
  for (const Layer& layer : layers) {
    if (layer.kind == LayerKind::Linear || layer.kind == LayerKind::Conv2d) {
      weight(layer.weight_name);
      if (!layer.bias_name.empty()) weight(layer.bias_name);
    }
    if (layer.kind == LayerKind::BatchNorm) {
      weight(layer.gamma_name);
      weight(layer.beta_name);
      weight(layer.mean_name);
      weight(layer.var_name);
      for (double v : weight(layer.var_name).values()) {
        require(v >= 0.0, ErrorCode::InvalidArgument,
                "layer '" + layer.name + "': negative variance");
      }
      require(layer.epsilon > 0.0, ErrorCode::InvalidArgument,
              "layer '" + layer.name + "': epsilon must be positive");
    }
    require(!layer.quant.enabled || layer.quantizable(), ErrorCode::InvalidArgument,
            "layer '" + layer.name + "' cannot be quantized");
    shape = layer_output_shape(layer, shape);
  }
}

namespace {

Tensor add_bias_rows(Tensor y, const Tensor& bias) {
  const std::size_t cols = y.extent(1);
  require(bias.size() == cols, ErrorCode::ShapeMismatch, "bias size mismatch");
  for (std::size_t i = 0; i < y.extent(0); ++i) {
    for (std::size_t j = 0; j < cols; ++j) y(i, j) += bias[j];
  }
  return y;
}

Tensor add_bias_channels(Tensor y, const Tensor& bias) {
  require(bias.size() == y.extent(1), ErrorCode::ShapeMismatch, "bias size mismatch");
  for (std::size_t n = 0; n < y.extent(0); ++n) {
    for (std::size_t c = 0; c < y.extent(1); ++c) {
      for (std::size_t h = 0; h < y.extent(2); ++h) {
        for (std::size_t w = 0; w < y.extent(3); ++w) y(n, c, h, w) += bias[c];
      }
    }
  }
  return y;
}

Tensor linear_weight_matrix(const Model& model, const Layer& layer) {
  const Tensor& w = model.weight(layer.weight_name);
  require(w.rank() == 2 && w.extent(0) == layer.in_features &&
              w.extent(1) == layer.out_features,
          ErrorCode::ShapeMismatch, "layer '" + layer.name + "': bad weight shape");
  return w;
}

Tensor conv_kernel(const Model& model, const Layer& layer) {
  const Tensor& w = model.weight(layer.weight_name);
  require(w.rank() == 4 && w.extent(0) == layer.out_channels &&
              w.extent(1) == layer.in_channels && w.extent(2) == layer.kernel_h &&
              w.extent(3) == layer.kernel_w,
          ErrorCode::ShapeMismatch, "layer '" + layer.name + "': bad kernel shape");
  return w;
}

// Inference-time batch norm: z = c*y + d per channel (Appendix-style affine).
std::pair<std::vector<double>, std::vector<double>> bn_coefficients(
    const Model& model, const Layer& layer) {
  const Tensor& gamma = model.weight(layer.gamma_name);
  const Tensor& beta = model.weight(layer.beta_name);
  const Tensor& mean = model.weight(layer.mean_name);
  const Tensor& var = model.weight(layer.var_name);
  require(gamma.size() == layer.channels && beta.size() == layer.channels &&
              mean.size() == layer.channels && var.size() == layer.channels,
          ErrorCode::ShapeMismatch, "layer '" + layer.name + "': bad BN parameters");
  std::vector<double> c(layer.channels), d(layer.channels);
  for (std::size_t j = 0; j < layer.channels; ++j) {
    const double denom = std::sqrt(var[j] + layer.epsilon);
    c[j] = gamma[j] / denom;
    d[j] = beta[j] - gamma[j] * mean[j] / denom;
  }
  return {std::move(c), std::move(d)};
}

Tensor apply_batch_norm(const Model& model, const Layer& layer, const Tensor& x) {
  auto [c, d] = bn_coefficients(model, layer);
  Tensor y(x.shape());
  if (x.rank() == 4) {
    for (std::size_t n = 0; n < x.extent(0); ++n) {
      for (std::size_t ch = 0; ch < x.extent(1); ++ch) {
        for (std::size_t h = 0; h < x.extent(2); ++h) {
          for (std::size_t w = 0; w < x.extent(3); ++w) {
            y(n, ch, h, w) = c[ch] * x(n, ch, h, w) + d[ch];
          }
        }
      }
    }
  } else {
    for (std::size_t i = 0; i < x.extent(0); ++i) {
      for (std::size_t j = 0; j < x.extent(1); ++j) {
        y(i, j) = c[j] * x(i, j) + d[j];
      }
    }
  }
  return y;
}

}  // namespace

Tensor apply_layer_fp32(const Model& model, const Layer& layer, const Tensor& x) {
  switch (layer.kind) {
    case LayerKind::Linear: {
      Tensor y = real_matmul(x, linear_weight_matrix(model, layer));
      if (!layer.bias_name.empty()) y = add_bias_rows(std::move(y), model.weight(layer.bias_name));
      return y;
    }
    case LayerKind::Conv2d: {
      Tensor y = conv2d_im2col(x, conv_kernel(model, layer), layer.conv);
      if (!layer.bias_name.empty())
        y = add_bias_channels(std::move(y), model.weight(layer.bias_name));
      return y;
    }
    case LayerKind::BatchNorm:
      return apply_batch_norm(model, layer, x);
    case LayerKind::ReLU:
      return relu(x);
    case LayerKind::GELU:
      return gelu(x);
    case LayerKind::Swish:
      return swish(x);
    case LayerKind::ClippedGELU:
      return clipped_gelu(x, layer.clip_limit);
    case LayerKind::Softmax:
      return softmax_rows(x);
    case LayerKind::Flatten:
      return x.reshaped(layer_output_shape(layer, x.shape()));
  }
  fail(ErrorCode::InvalidArgument, "unknown layer kind");
}

namespace {

QuantParams activation_params_or_fail(const Layer& layer) {
  require(layer.quant.activation_params.has_value(), ErrorCode::MissingCalibration,
          "missing calibration for tensor '" + layer.input_tensor_name() + "'");
  return *layer.quant.activation_params;
}

QLinearWeights qlinear_from_params(const Tensor& w, const QuantParams& params) {
  QLinearWeights out;
  out.rows = w.extent(0);
  out.cols = w.extent(1);
  const QuantizedTensor wq = quantize(w, params);
  out.data = wq.data;
  out.col_scales = params.scales;
  return out;
}

Tensor apply_layer_int8(const Model& model, const Layer& layer, const Tensor& x) {
  const QuantParams act = activation_params_or_fail(layer);
  if (layer.kind == LayerKind::Linear) {
    const QuantizedTensor xq = quantize(x, act);
    const Tensor& w = linear_weight_matrix(model, layer);
    const QuantParams wp = layer.quant.weight_params ? *layer.quant.weight_params
                                                     : derive_weight_params(model, layer);
    Tensor y = integer_matmul_scale(xq, qlinear_from_params(w, wp));
    if (!layer.bias_name.empty()) y = add_bias_rows(std::move(y), model.weight(layer.bias_name));
    return y;
  }
  // Conv2d
  const QuantizedTensor xq = quantize(x, act);
  Tensor y = conv2d_im2col_quantized(xq, conv_kernel(model, layer), layer.conv, 8,
                                     layer.quant.per_channel_weights);
  if (!layer.bias_name.empty())
    y = add_bias_channels(std::move(y), model.weight(layer.bias_name));
  return y;
}

}  // namespace

Tensor forward_fp32(const Model& model, const Tensor& x, const LayerObserver& observer) {
  Tensor current = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (observer && layer.quantizable()) observer(i, current);
    current = apply_layer_fp32(model, layer, current);
  }
  return current;
}

Tensor forward_int8(const Model& model, const Tensor& x) {
  Tensor current = x;
  for (const Layer& layer : model.layers) {
    if (layer.quant.enabled && layer.quantizable()) {
      current = apply_layer_int8(model, layer, current);
    } else {
      current = apply_layer_fp32(model, layer, current);
    }
  }
  return current;
}

QuantParams derive_weight_params(const Model& model, const Layer& layer) {
  require(layer.quantizable(), ErrorCode::InvalidArgument,
          "layer '" + layer.name + "' has no weights to quantize");
  const Tensor& w = model.weight(layer.weight_name);
  // Per-output-channel slices: columns for linear (p x n), leading axis for
  // conv kernels (OIHW).
  const int axis = layer.kind == LayerKind::Linear ? 1 : 0;
  const std::size_t slices = layer.quant.per_channel_weights
                                 ? w.extent(static_cast<std::size_t>(axis))
                                 : 1;
  std::vector<double> alphas(slices, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::size_t s =
        layer.quant.per_channel_weights ? slice_of_index(w.shape(), axis, i) : 0;
    alphas[s] = std::max(alphas[s], std::abs(w[i]));
  }
  QuantParams params;
  params.scheme = Scheme::Scale;
  params.bit_width = 8;
  params.axis = layer.quant.per_channel_weights ? axis : QuantParams::kPerTensor;
  params.scales.resize(slices);
  params.zero_points.assign(slices, 0);
  for (std::size_t s = 0; s < slices; ++s) {
    params.scales[s] = alphas[s] > 0.0 ? scale_params(alphas[s], 8).scale() : 1.0;
  }
  return params;
}

void prepare_weight_params(Model& model) {
  for (Layer& layer : model.layers) {
    if (layer.quantizable()) {
      layer.quant.weight_params = derive_weight_params(model, layer);
    }
  }
}

void attach_calibration(Model& model, const CalibrationCache& cache) {
  for (Layer& layer : model.layers) {
    if (!layer.quantizable()) continue;
    if (const auto* entry = cache.find(layer.input_tensor_name())) {
      layer.quant.activation_params = scale_params(entry->alpha, 8);
      layer.quant.activation_method = entry->method;
    }
  }
}

CalibrationCache export_calibration(const Model& model) {
  CalibrationCache cache;
  for (const Layer& layer : model.layers) {
    if (layer.quantizable() && layer.quant.activation_params) {
      cache.put(layer.input_tensor_name(), layer.quant.activation_method,
                params_range(*layer.quant.activation_params).alpha);
    }
  }
  return cache;
}

void set_all_quantized(Model& model, bool enabled) {
  for (Layer& layer : model.layers) {
    if (layer.quantizable()) layer.quant.enabled = enabled;
  }
}

void set_layer_quantized(Model& model, const std::string& name, bool enabled) {
  Layer* layer = model.find_layer(name);
  require(layer != nullptr, ErrorCode::InvalidArgument, "no layer named '" + name + "'");
  require(layer->quantizable() || !enabled, ErrorCode::InvalidArgument,
          "layer '" + name + "' cannot be quantized");
  layer->quant.enabled = enabled;
}

Model fold_batch_norm(const Model& model) {
  Model folded = model;
  std::vector<Layer> kept;
  kept.reserve(folded.layers.size());
  for (const Layer& layer : folded.layers) {
    if (layer.kind != LayerKind::BatchNorm) {
      kept.push_back(layer);
      continue;
    }
    require(!kept.empty() && (kept.back().kind == LayerKind::Linear ||
                              kept.back().kind == LayerKind::Conv2d),
            ErrorCode::InvalidArgument,
            "batch norm '" + layer.name + "' does not follow a linear or conv layer");
    Layer& prev = kept.back();
    const std::size_t out_ch = prev.kind == LayerKind::Linear ? prev.out_features
                                                              : prev.out_channels;
    require(out_ch == layer.channels, ErrorCode::ShapeMismatch,
            "batch norm '" + layer.name + "' channel mismatch");
    auto [c, d] = bn_coefficients(folded, layer);

    Tensor& w = folded.weight(prev.weight_name);
    if (prev.kind == LayerKind::Linear) {
      for (std::size_t k = 0; k < w.extent(0); ++k) {
        for (std::size_t j = 0; j < w.extent(1); ++j) w(k, j) *= c[j];
      }
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] *= c[slice_of_index(w.shape(), 0, i)];
      }
    }

    if (prev.bias_name.empty()) {
      prev.bias_name = prev.name + ".bias";
      require(folded.weights.find(prev.bias_name) == folded.weights.end(),
              ErrorCode::InvalidArgument,
              "cannot synthesize bias tensor '" + prev.bias_name + "'");
      folded.weights.emplace(prev.bias_name, Tensor({out_ch}));
    }
    Tensor& b = folded.weight(prev.bias_name);
    for (std::size_t j = 0; j < out_ch; ++j) b[j] = c[j] * b[j] + d[j];

    folded.weights.erase(layer.gamma_name);
    folded.weights.erase(layer.beta_name);
    folded.weights.erase(layer.mean_name);
    folded.weights.erase(layer.var_name);
  }
  folded.layers = std::move(kept);
  // Stored weight params predate the fold; recompute where present.
  for (Layer& layer : folded.layers) {
    if (layer.quantizable() && layer.quant.weight_params) {
      layer.quant.weight_params = derive_weight_params(folded, layer);
    }
  }
  return folded;
}

Model rewrite_gelu_clipped(const Model& model, double limit) {
  require(limit > 0.0, ErrorCode::InvalidArgument, "clip limit must be positive");
  Model rewritten = model;
  for (Layer& layer : rewritten.layers) {
    if (layer.kind == LayerKind::GELU) {
      layer.kind = LayerKind::ClippedGELU;
      layer.clip_limit = limit;
    }
  }
  return rewritten;
}

}  // namespace quantkit
