// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/tensor.hpp"

#include <cmath>

#include <fmt/format.h>

#include "synthforge/errors.hpp"

namespace synthforge {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += fmt::format("{}", shape[i]);
  }
  out += "]";
  return out;
}

Shape shape_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * shape[i];
  }
  return strides;
}

Tensor::Tensor() : Tensor(Shape{}) {}

Tensor::Tensor(Shape shape)
    : data_(std::make_shared<std::vector<double>>(shape_numel(shape), 0.0)),
      shape_(std::move(shape)) {
  if (shape_.size() > 4) {
    throw DimensionError(fmt::format("tensor rank {} exceeds the supported maximum of 4", shape_.size()));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : data_(std::make_shared<std::vector<double>>(std::move(values))),
      shape_(std::move(shape)) {
  if (shape_.size() > 4) {
    throw DimensionError(fmt::format("tensor rank {} exceeds the supported maximum of 4", shape_.size()));
  }
  if (data_->size() != shape_numel(shape_)) {
    throw DimensionError(fmt::format("shape {} expects {} values, got {}", shape_str(shape_),
                                     shape_numel(shape_), data_->size()));
  }
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  (*t.data_)[0] = value;
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : *t.data_) v = value;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("matrix literal has ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError(fmt::format("axis {} out of range for shape {}", axis, shape_str(shape_)));
  }
  return shape_[axis];
}

double Tensor::value() const {
  if (numel() != 1) {
    throw DimensionError(fmt::format("value() requires a single-element tensor, shape is {}", shape_str(shape_)));
  }
  return (*data_)[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError(fmt::format("index of rank {} used on tensor of rank {}", index.size(), shape_.size()));
  }
  const Shape strides = shape_strides(shape_);
  std::size_t offset = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) {
      throw DimensionError(fmt::format("index {} out of range for axis {} of shape {}", i, axis, shape_str(shape_)));
    }
    offset += i * strides[axis];
    ++axis;
  }
  return (*data_)[offset];
}

void Tensor::ensure_grad() {
  if (!grad_) grad_ = std::make_shared<std::vector<double>>(data_->size(), 0.0);
}

std::span<double> Tensor::grad() {
  if (!grad_) throw ArgumentError("gradient buffer not allocated; call ensure_grad() first");
  return {grad_->data(), grad_->size()};
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw ArgumentError("gradient buffer not allocated; call ensure_grad() first");
  return {grad_->data(), grad_->size()};
}

void Tensor::zero_grad() {
  if (grad_) {
    for (double& g : *grad_) g = 0.0;
  }
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (on) ensure_grad();
  else grad_.reset();
  return *this;
}

Tensor Tensor::clone() const {
  return Tensor(shape_, *data_);
}

Tensor Tensor::view_reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError(fmt::format("cannot reshape {} ({} elements) to {} ({} elements)",
                                     shape_str(shape_), numel(), shape_str(shape), shape_numel(shape)));
  }
  if (shape.size() > 4) {
    throw DimensionError(fmt::format("tensor rank {} exceeds the supported maximum of 4", shape.size()));
  }
  Tensor out;
  out.data_ = data_;
  out.grad_ = grad_;
  out.shape_ = std::move(shape);
  return out;
}

bool all_finite(const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace synthforge
