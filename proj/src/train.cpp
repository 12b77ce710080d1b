// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/train.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "quantkit/autodiff.hpp"
#include "quantkit/error.hpp"
#include "quantkit/rng.hpp"

namespace quantkit {

namespace {

constexpr double kMinAlpha = 1e-8;
constexpr double kFinalLrFraction = 0.01;

}  // namespace

double cosine_annealed_lr(double lr0, std::size_t step, std::size_t total_steps) {
  const double lr_end = lr0 * kFinalLrFraction;
  if (total_steps <= 1) return lr0;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_end + 0.5 * (lr0 - lr_end) * (1.0 + std::cos(progress * 3.14159265358979323846));
}

TrainResult train(const Model& model, const Dataset& data, const TrainConfig& config) {
  model.validate();
  require(config.epochs >= 0, ErrorCode::InvalidArgument, "epochs must be >= 0");
  TrainResult result{model, 0.0, 0};
  if (config.epochs == 0) return result;
  require(data.count() > 0, ErrorCode::InvalidArgument, "training data is empty");
  require(config.batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(config.learning_rate > 0.0, ErrorCode::InvalidArgument,
          "learning_rate must be positive");

  Model& m = result.model;

  // Learned ranges start from the calibrated alphas; entries stay <= 0 for
  // layers that keep fixed ranges.
  std::vector<double> alphas(m.layers.size(), 0.0);
  if (config.learn_ranges) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      const Layer& layer = m.layers[i];
      if (layer.quant.enabled && layer.quantizable()) {
        require(layer.quant.activation_params.has_value(), ErrorCode::MissingCalibration,
                "missing calibration for tensor '" + layer.input_tensor_name() + "'");
        alphas[i] = params_range(*layer.quant.activation_params).alpha;
      }
    }
  }

  std::map<std::string, Tensor> velocity;
  std::map<std::string, double> alpha_velocity;

  const std::size_t batches_per_epoch =
      (data.count() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps =
      static_cast<std::size_t>(config.epochs) * batches_per_epoch;
  const double alpha_lr0 = config.range_learning_rate > 0.0 ? config.range_learning_rate
                                                            : config.learning_rate;

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  double last_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch; ++b, ++step) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, data.count());
      std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
      const Tensor x = data.batch(indices);
      std::vector<std::int32_t> labels(indices.size());
      for (std::size_t i = 0; i < indices.size(); ++i) labels[i] = data.labels[indices[i]];

      Backprop engine(m, SimMode::FakeQuant);
      if (config.learn_ranges) engine.set_alpha_overrides(&alphas);
      const Tensor logits = engine.forward(x);
      auto [loss, d_logits] = softmax_cross_entropy(logits, labels);
      last_loss = loss;
      if (!std::isfinite(loss)) {
        fail(ErrorCode::Diverged, "training diverged: non-finite loss at step " +
                                      std::to_string(step) + " (epoch " +
                                      std::to_string(epoch) + ")");
      }
      const Backprop::Gradients grads = engine.backward(d_logits);

      const double lr = cosine_annealed_lr(config.learning_rate, step, total_steps);
      for (const auto& [name, grad] : grads.params) {
        Tensor& w = m.weight(name);
        auto [it, inserted] = velocity.try_emplace(name, Tensor(w.shape()));
        Tensor& v = it->second;
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] + grad[i];
          w[i] -= lr * v[i];
        }
      }

      if (config.learn_ranges) {
        const double alpha_lr = cosine_annealed_lr(alpha_lr0, step, total_steps);
        for (std::size_t i = 0; i < alphas.size(); ++i) {
          if (alphas[i] <= 0.0) continue;
          const double g = grads.alphas[i] + config.range_weight_decay * alphas[i];
          double& v = alpha_velocity[m.layers[i].name];
          v = config.momentum * v + g;
          alphas[i] = std::max(alphas[i] - alpha_lr * v, kMinAlpha);
        }
      }
    }
  }

  // Learned ranges become the model's calibrated ranges.
  if (config.learn_ranges) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (alphas[i] > 0.0) {
        m.layers[i].quant.activation_params = scale_params(alphas[i], 8);
      }
    }
  }
  prepare_weight_params(m);

  result.final_loss = last_loss;
  result.steps = step;
  return result;
}

}  // namespace quantkit
