// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal sequential model: an ordered layer list over a named weight
// store, with fp32 reference execution, int8 execution for the enabled
// layers, and batch-norm folding.

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "quantkit/calibrate.hpp"
#include "quantkit/kernels.hpp"
#include "quantkit/quant.hpp"
#include "quantkit/tensor.hpp"

namespace quantkit {

enum class LayerKind {
  Linear,
  Conv2d,
  BatchNorm,
  ReLU,
  GELU,
  Swish,
  ClippedGELU,
  Softmax,
  Flatten,
};

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

// Only the compute-intensive layers carry quantization state; everything
// else stays in floating point.
struct QuantConfig {
  bool enabled = false;
  bool per_channel_weights = true;
  std::optional<QuantParams> weight_params;      // set by prepare_weight_params
  std::optional<QuantParams> activation_params;  // set by attach_calibration
  CalibrationMethod activation_method;           // method behind activation_params
};

struct Layer {
  LayerKind kind = LayerKind::Linear;
  std::string name;

  // Linear
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // Conv2d
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  Conv2dSpec conv;
  // BatchNorm
  std::size_t channels = 0;
  double epsilon = 1e-5;
  // ClippedGELU
  double clip_limit = 0.0;

  std::string weight_name;  // Linear/Conv2d
  std::string bias_name;    // optional, empty when absent
  std::string gamma_name, beta_name, mean_name, var_name;  // BatchNorm

  QuantConfig quant;

  bool quantizable() const {
    return kind == LayerKind::Linear || kind == LayerKind::Conv2d;
  }
  // Name of the activation tensor feeding this layer, as used in the
  // calibration cache.
  std::string input_tensor_name() const { return name + ".input"; }
};

struct Model {
  Shape input_shape;  // per-sample shape, batch dimension excluded
  std::vector<Layer> layers;
  std::map<std::string, Tensor> weights;

  const Tensor& weight(const std::string& name) const;
  Tensor& weight(const std::string& name);
  Layer* find_layer(const std::string& name);
  const Layer* find_layer(const std::string& name) const;

  // Checks weight references resolve and shapes chain from input_shape.
  void validate() const;
};

Shape layer_output_shape(const Layer& layer, const Shape& input);

// Called with the index of each quantizable layer and the activation tensor
// feeding it, before the layer runs.
using LayerObserver = std::function<void(std::size_t, const Tensor&)>;

Tensor forward_fp32(const Model& model, const Tensor& x,
                    const LayerObserver& observer = {});

// One layer of the fp32 path, reading weights from `model`.
Tensor apply_layer_fp32(const Model& model, const Layer& layer, const Tensor& x);

// Enabled layers quantize their input per-tensor on the scale scheme, use
// the integer kernels with per-channel (or per-tensor) weights, and emit a
// real-valued output; disabled layers run in fp32.
Tensor forward_int8(const Model& model, const Tensor& x);

// Per-layer weight quant params (max calibration, scale scheme) derived
// from the current weights.
QuantParams derive_weight_params(const Model& model, const Layer& layer);
void prepare_weight_params(Model& model);

// Copies calibrated activation ranges into matching layers; layers without
// a cache entry are left uncalibrated.
void attach_calibration(Model& model, const CalibrationCache& cache);

// The model's current activation ranges as a cache (inverse of attach, with
// ranges possibly updated by range learning).
CalibrationCache export_calibration(const Model& model);

void set_all_quantized(Model& model, bool enabled);
void set_layer_quantized(Model& model, const std::string& name, bool enabled);

// Folds every BatchNorm into the preceding Linear/Conv2d: w' = c*w per
// output channel, b' = c*b + d, BN layer removed. fp32 outputs unchanged.
Model fold_batch_norm(const Model& model);

// Rewrite pass replacing GELU layers with ClippedGELU(limit).
Model rewrite_gelu_clipped(const Model& model, double limit);

}  // namespace quantkit
