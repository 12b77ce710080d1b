// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/tensor.hpp"

#include <sstream>

#include "quantkit/error.hpp"

namespace quantkit {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return shape.empty() ? 0 : n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << ")";
  return out.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == shape_size(shape_), ErrorCode::ShapeMismatch,
          "tensor data size does not match shape " + shape_to_string(shape_));
}

Tensor::Tensor(Shape shape, std::initializer_list<double> data)
    : Tensor(std::move(shape), std::vector<double>(data)) {}

std::size_t Tensor::extent(std::size_t axis) const {
  require(axis < shape_.size(), ErrorCode::InvalidArgument, "axis out of range");
  return shape_[axis];
}

double& Tensor::operator()(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}

double& Tensor::operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
}

double Tensor::operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
  return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
}

Tensor Tensor::reshaped(Shape new_shape) const {
  require(shape_size(new_shape) == data_.size(), ErrorCode::ShapeMismatch,
          "reshape size mismatch");
  return Tensor(std::move(new_shape), data_);
}

}  // namespace quantkit
