// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "synthforge/tensor.hpp"

namespace synthforge {

/// Reverse-mode autodiff over an explicit operation tape.
///
/// Each op computes its output eagerly and, when recording is enabled and at
/// least one input carries a gradient buffer, pushes a closure that
/// propagates adjoints from the output to the inputs.  backward() seeds the
/// scalar loss with 1 and runs the closures in reverse order; gradients
/// accumulate additively, so a tensor consumed twice receives both
/// contributions.  Tensors on the tape must not be mutated in place between
/// the forward pass and backward().
///
/// A tape constructed with recording = false performs only forward
/// computation, which keeps inference paths free of tape growth.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t op_count() const { return ops_.size(); }

  // ---- linear algebra ----

  /// [M,K] x [K,N] -> [M,N].
  Tensor matmul(const Tensor& a, const Tensor& b);

  /// x: [N,Cin,H,W], kernel: [Cout,Cin,kH,kW].  Zero padding, unit dilation.
  /// Output spatial extent: floor((H + 2 pad - kH) / stride) + 1.
  Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t pad);

  /// Structural adjoint of conv2d.  x: [N,Cin,H,W], kernel: [Cin,Cout,kH,kW].
  /// Output spatial extent: (H - 1) * stride - 2 pad + kH.
  Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t pad);

  // ---- elementwise ----

  Tensor relu(const Tensor& x);
  Tensor leaky_relu(const Tensor& x, double alpha);
  Tensor sigmoid(const Tensor& x);
  Tensor tanh(const Tensor& x);
  Tensor exp(const Tensor& x);
  /// Natural log; any non-positive element raises a domain error.
  Tensor log(const Tensor& x);
  /// log(max(x, eps)); keeps probabilities away from log(0).
  Tensor log_clamped(const Tensor& x, double eps = 1e-7);
  Tensor neg(const Tensor& x);
  Tensor scale(const Tensor& x, double c);
  Tensor add_const(const Tensor& x, double c);
  /// Clamp to [lo, hi]; gradient is zero outside the open interval.
  Tensor clamp(const Tensor& x, double lo, double hi);
  Tensor square(const Tensor& x);

  // ---- binary with broadcasting ----
  //
  // Shapes must be identical, or one operand must be a single element, or
  // the lower-rank shape must equal a trailing suffix of the higher-rank
  // shape (for example [N,O] + [O]).

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);

  /// x: [N,C,H,W] plus a per-channel bias of shape [C] or [N,C].
  Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

  // ---- reductions and structure ----

  /// Sum over the given axes; an empty axis list reduces to a rank-0 scalar.
  Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes = {});
  Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes = {});
  Tensor reshape(const Tensor& x, Shape shape);
  /// Concatenate along an axis; all other extents must agree.
  Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

  /// Seeds `loss` (which must be a single-element tensor produced by this
  /// tape) with adjoint 1 and propagates to every connected tensor.
  void backward(const Tensor& loss);

 private:
  friend class TapeAccess;
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
  template <typename Fwd, typename Drv>
  Tensor unary_op(const Tensor& x, Fwd&& fwd, Drv&& deriv);
  enum class BinKind { add, sub, mul };
  Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind);

  std::vector<std::function<void()>> ops_;
  bool recording_;
};

/// Result of a finite-difference gradient audit.
struct GradCheckResult {
  /// max over checked coordinates of |analytic - central| / max(1, |analytic|).
  double max_rel_error = 0.0;
  /// Flat indices skipped because the one-sided difference quotients
  /// disagree, which marks a non-differentiable point such as relu at 0.
  std::vector<std::size_t> excluded;
  std::size_t checked = 0;
};

/// Compares the tape gradient of a scalar-valued function against central
/// finite differences, coordinate by coordinate.  `f` must treat its input
/// as read-only.  Non-finite values anywhere raise a numeric error.
GradCheckResult grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                           const Tensor& x, double h = 1e-6);

}  // namespace synthforge
