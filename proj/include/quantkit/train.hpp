// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Quantization-aware fine-tuning. SGD with momentum over the Linear/Conv2d
// weights and biases, fake quantization on the enabled layers, and a cosine
// learning-rate schedule annealing to 1/100th of the initial rate.
// Activation ranges stay fixed at their calibrated values unless range
// learning is turned on.

#pragma once

#include <cstdint>

#include "quantkit/graph.hpp"
#include "quantkit/model_io.hpp"

namespace quantkit {

struct TrainConfig {
  int epochs = 0;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  // PACT-style learned activation ranges.
  bool learn_ranges = false;
  double range_learning_rate = 0.0;  // 0 uses learning_rate
  double range_weight_decay = 1e-4;
};

struct TrainResult {
  Model model;
  double final_loss = 0.0;
  std::size_t steps = 0;
};

// lr decays from lr0 at step 0 to lr0/100 at step total-1 along a half
// cosine period.
double cosine_annealed_lr(double lr0, std::size_t step, std::size_t total_steps);

// Fine-tunes a copy of the model on the labeled dataset with softmax
// cross-entropy. Zero epochs returns the model unchanged. A non-finite
// loss aborts with a diagnostic.
TrainResult train(const Model& model, const Dataset& data, const TrainConfig& config);

}  // namespace quantkit
