// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "quantkit/tensor.hpp"

namespace quantkit {

// Rational Chebyshev approximation of erf after W. J. Cody (1969), the
// SPECFUN variant. Absolute error is far below the 1e-7 the activation
// contract asks for; the unit tests pin it against the C library.
double erf_approx(double x);

double sigmoid(double x);
double gelu_value(double x);
double swish_value(double x);

// d/dx of the activations, used by the training backward pass.
double gelu_derivative(double x);
double swish_derivative(double x);

Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor swish(const Tensor& x);
// min(GELU(x), limit): keeps the calibrated range small enough that the int8
// grid can still resolve the small negative outputs.
Tensor clipped_gelu(const Tensor& x, double limit);
// Row-wise softmax over the last dimension of a 2-D tensor.
Tensor softmax_rows(const Tensor& x);

}  // namespace quantkit
