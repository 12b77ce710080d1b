// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over the sequential graph with simulated
// quantization. The fake-quantize nodes use the straight-through estimator:
// identity gradient inside the representable range, zero outside.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quantkit/graph.hpp"
#include "quantkit/quant.hpp"
#include "quantkit/tensor.hpp"

namespace quantkit {

// Pair of a value and the gradient accumulated for it.
struct DualTensor {
  Tensor value;
  Tensor gradient;
};

// How enabled layers simulate quantization inside the differentiable path.
//   FakeQuant: grid-snapped inputs and weights (training path).
//   ClipOnly:  range clipping without rounding; the smooth surrogate that
//              finite differences are taken against.
//   None:      plain fp32 regardless of enables.
enum class SimMode { FakeQuant, ClipOnly, None };

// Eq-13 indicator: 1 where x lies in the representable range of its slice,
// 0 where it clips.
Tensor ste_mask(const Tensor& x, const QuantParams& params);

// Range clipping per slice, the unrounded surrogate of fake quantization.
Tensor clip_to_range(const Tensor& x, const QuantParams& params);

// Forward fake-quantizes x.value; the returned gradient is x.gradient
// masked by the STE indicator.
DualTensor fake_quant_forward_backward(const DualTensor& x, const QuantParams& params);

// PACT symmetric-range gradient: sum of upstream where x > alpha minus sum
// of upstream where x < -alpha.
double pact_range_gradient(const Tensor& x, double alpha, const Tensor& upstream);

// Learned activation range with its gradient accumulator. alpha stays
// positive by projection after each optimizer step.
struct LearnableRange {
  double alpha = 1.0;
  bool learnable = false;
  double gradient = 0.0;
};

// Softmax cross-entropy over logits rows; returns (mean loss, dL/dlogits).
std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                std::span<const std::int32_t> labels);

// 0.5 * sum((out - target)^2); returns (loss, dL/dout).
std::pair<double, Tensor> squared_error(const Tensor& out, const Tensor& target);

// One forward/backward pass over the model. Weight fake-quant params are
// re-derived from the current weights on every forward (per-channel max);
// activation params come from the layer config unless overridden.
class Backprop {
 public:
  Backprop(const Model& model, SimMode mode);
  ~Backprop();
  Backprop(const Backprop&) = delete;
  Backprop& operator=(const Backprop&) = delete;

  // Learned alphas, one per layer; entries <= 0 fall back to the calibrated
  // activation params. Borrowed pointer, caller keeps it alive.
  void set_alpha_overrides(const std::vector<double>* alphas) {
    alpha_overrides_ = alphas;
  }

  Tensor forward(const Tensor& x);

  struct Gradients {
    std::map<std::string, Tensor> params;  // keyed by weight tensor name
    std::vector<double> alphas;            // per layer, 0 where not applicable
    Tensor input;
  };
  // Requires a preceding forward; output_gradient has the output's shape.
  Gradients backward(const Tensor& output_gradient);

 private:
  struct Tape;
  const Model& model_;
  SimMode mode_;
  const std::vector<double>* alpha_overrides_ = nullptr;
  std::vector<Tape> tapes_;

  bool simulate(const Layer& layer) const {
    return mode_ != SimMode::None && layer.quant.enabled && layer.quantizable();
  }
  QuantParams activation_params_for(const Layer& layer, std::size_t index) const;
};

// Differentiable loss evaluation used by grad_check's finite differences.
double loss_at(const Model& model, const Tensor& input, const Tensor& target,
               SimMode mode);

struct GradCheckReport {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

// Central-difference check of the analytic parameter gradients at `input`
// against the clip-only surrogate (identical to the plain network when no
// layer is quantized). The evaluation point must keep clear of quantization
// step boundaries; derivatives do not exist there.
GradCheckReport grad_check(const Model& model, const Tensor& input,
                           const Tensor& target, double epsilon);

}  // namespace quantkit
