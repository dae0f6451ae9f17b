// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace synthforge {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
Shape shape_strides(const Shape& shape);

/// Dense double tensor, row-major, rank 0 to 4.
///
/// A Tensor is a cheap value-type handle: copies share the underlying value
/// buffer and (if allocated) the gradient buffer.  clone() is the deep copy.
/// The gradient buffer is lazy; a tensor participates in backpropagation
/// exactly when its gradient buffer exists.  Reshaped views share both
/// buffers, so gradient flow through a reshape needs no extra bookkeeping.
class Tensor {
 public:
  /// Rank-0 tensor holding 0.0.
  Tensor();
  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  /// Tensor with explicit contents; values.size() must equal the shape's
  /// element count.
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor full(Shape shape, double value);
  /// Convenience builder for 2-D literals in tests and examples.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_->size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  std::span<double> data_mut() { return {data_->data(), data_->size()}; }

  /// Value of a single-element tensor.
  double value() const;
  double at(std::initializer_list<std::size_t> index) const;

  /// Allocates (zero-filled) the gradient buffer if absent.
  void ensure_grad();
  bool has_grad() const { return grad_ != nullptr; }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  /// Marks this tensor as a differentiable leaf by allocating its gradient
  /// buffer.  Returns *this for chaining.
  Tensor& set_requires_grad(bool on = true);

  /// Deep copy of the values.  The clone never carries a gradient buffer.
  Tensor clone() const;

  /// True when both handles share one value buffer.
  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

  /// View with a different shape over the same buffers.  The element count
  /// must match.
  Tensor view_reshaped(Shape shape) const;

 private:
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;
  Shape shape_;
};

/// True when every element is finite.
bool all_finite(const Tensor& t);

}  // namespace synthforge
