// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/activations.hpp"

#include <cmath>

#include "quantkit/error.hpp"

namespace quantkit {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Coefficient tables from Cody's SPECFUN erf (rational Chebyshev fits on
// three ranges).
constexpr double kErfA[5] = {3.16112374387056560e+00, 1.13864154151050156e+02,
                             3.77485237685302021e+02, 3.20937758913846947e+03,
                             1.85777706184603153e-01};
constexpr double kErfB[4] = {2.36012909523441209e+01, 2.44024637934444173e+02,
                             1.28261652607737228e+03, 2.84423683343917062e+03};
constexpr double kErfC[9] = {5.64188496988670089e-01, 8.88314979438837594e+00,
                             6.61191906371416295e+01, 2.98635138197400131e+02,
                             8.81952221241769090e+02, 1.71204761263407058e+03,
                             2.05107837782607147e+03, 1.23033935479799725e+03,
                             2.15311535474403846e-08};
constexpr double kErfD[8] = {1.57449261107098347e+01, 1.17693950891312499e+02,
                             5.37181101862009858e+02, 1.62138957456669019e+03,
                             3.29079923573345963e+03, 4.36261909014324716e+03,
                             3.43936767414372164e+03, 1.23033935480374942e+03};
constexpr double kErfP[6] = {3.05326634961232344e-01, 3.60344899949804439e-01,
                             1.25781726111229246e-01, 1.60837851487422766e-02,
                             6.58749161529837803e-04, 1.63153871373020978e-02};
constexpr double kErfQ[5] = {2.56852019228982242e+00, 1.87295284992346047e+00,
                             5.27905102951428412e-01, 6.05183413124413191e-02,
                             2.33520497626869185e-03};

// erfc(y) for 0.46875 < y, via exp(-y^2) * rational(y) with the split
// exponent trick that keeps exp accurate for large y.
double erfc_tail(double y) {
  double result;
  if (y <= 4.0) {
    double num = kErfC[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + kErfC[i]) * y;
      den = (den + kErfD[i]) * y;
    }
    result = (num + kErfC[7]) / (den + kErfD[7]);
  } else {
    const double ysq = 1.0 / (y * y);
    double num = kErfP[5] * ysq;
    double den = ysq;
    for (int i = 0; i < 4; ++i) {
      num = (num + kErfP[i]) * ysq;
      den = (den + kErfQ[i]) * ysq;
    }
    result = ysq * (num + kErfP[4]) / (den + kErfQ[4]);
    result = (5.6418958354775628695e-01 - result) / y;
  }
  const double ysq = std::floor(y * 16.0) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del) * result;
}

}  // namespace

double erf_approx(double x) {
  const double y = std::abs(x);
  if (y <= 0.46875) {
    const double ysq = y * y;
    double num = kErfA[4] * ysq;
    double den = ysq;
    for (int i = 0; i < 3; ++i) {
      num = (num + kErfA[i]) * ysq;
      den = (den + kErfB[i]) * ysq;
    }
    return x * (num + kErfA[3]) / (den + kErfB[3]);
  }
  if (y >= 6.0) return x > 0.0 ? 1.0 : -1.0;  // erfc(6) < 1e-16
  const double erfc = erfc_tail(y);
  return x > 0.0 ? 1.0 - erfc : erfc - 1.0;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu_value(double x) { return 0.5 * x * (1.0 + erf_approx(x * kInvSqrt2)); }

double swish_value(double x) { return x * sigmoid(x); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + erf_approx(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

double swish_derivative(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

namespace {

template <typename F>
Tensor elementwise(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Tensor relu(const Tensor& x) {
  return elementwise(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor gelu(const Tensor& x) { return elementwise(x, gelu_value); }

Tensor swish(const Tensor& x) { return elementwise(x, swish_value); }

Tensor clipped_gelu(const Tensor& x, double limit) {
  require(limit > 0.0, ErrorCode::InvalidArgument, "clip limit must be positive");
  return elementwise(x, [limit](double v) { return std::min(gelu_value(v), limit); });
}

Tensor softmax_rows(const Tensor& x) {
  require(x.rank() == 2, ErrorCode::ShapeMismatch, "softmax expects a 2-D tensor");
  Tensor out(x.shape());
  const std::size_t rows = x.extent(0), cols = x.extent(1);
  for (std::size_t i = 0; i < rows; ++i) {
    double row_max = x(i, 0);
    for (std::size_t j = 1; j < cols; ++j) row_max = std::max(row_max, x(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = std::exp(x(i, j) - row_max);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < cols; ++j) out(i, j) /= sum;
  }
  return out;
}

}  // namespace quantkit
