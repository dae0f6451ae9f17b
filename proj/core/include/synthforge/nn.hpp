// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synthforge/autodiff.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/tensor.hpp"

namespace synthforge {

enum class ActKind { identity, relu, leaky_relu, sigmoid, tanh };

Tensor apply_activation(Tape& tape, const Tensor& x, ActKind act, double alpha = 0.0);

enum class LayerKind { dense, conv2d, conv_transpose2d, activation };

/// One trainable (or purely functional) network stage.  Parameter layout:
///   dense:            w [in, out], b [out]
///   conv2d:           w [out_ch, in_ch, k, k], b [out_ch]
///   conv_transpose2d: w [in_ch, out_ch, k, k], b [out_ch]
struct Layer {
  LayerKind kind = LayerKind::activation;
  Tensor w;
  Tensor b;
  std::size_t in_dim = 0, out_dim = 0;
  std::size_t in_ch = 0, out_ch = 0, ksize = 0, stride = 1, pad = 0;
  ActKind act = ActKind::identity;
  double alpha = 0.0;
  bool has_params() const { return kind != LayerKind::activation; }
  Tensor forward(Tape& tape, const Tensor& x) const;
};

Layer dense_layer(std::size_t in, std::size_t out);
Layer conv2d_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, std::size_t pad);
Layer conv_transpose2d_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, std::size_t pad);
Layer activation_layer(ActKind act, double alpha = 0.0);

/// Fills layer parameters deterministically from the stream: dense weights
/// are Kaiming-uniform over [-sqrt(6/fan_in), sqrt(6/fan_in)], convolution
/// weights are normal with standard deviation 0.02, biases are zero.
void init_params(Layer& layer, RngStream& rng);

/// x [N, in] -> [N, out] with bias broadcast over rows.
Tensor dense_forward(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

/// Sinusoidal position embedding of a scalar step index.  dim must be even.
/// Slot 2i holds sin(t / 10000^(2i/dim)), slot 2i+1 the matching cos.
Tensor time_embedding(std::uint64_t t, std::size_t dim);
/// Stacked embeddings, one row per entry: [N, dim].
Tensor time_embedding_batch(const std::vector<std::uint64_t>& ts, std::size_t dim);

// ---- optimization ----

enum class OptimizerKind { sgd, adam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 0.001;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// 0 disables clipping; otherwise gradients are rescaled when the global
  /// L2 norm across the parameter set exceeds this value.
  double clip_norm = 0.0;
  bool operator==(const OptimizerSettings&) const = default;
};

/// In-place SGD update with classical momentum:
///   v <- momentum * v + g;  p <- p - lr * v
void sgd_update(std::span<double> p, std::span<const double> g, std::span<double> v,
                double lr, double momentum);

/// In-place Adam update (bias-corrected, t is 1-based):
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_update(std::span<double> p, std::span<const double> g,
                 std::span<double> m, std::span<double> v, std::uint64_t t,
                 double lr, double beta1, double beta2, double eps);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Parameters that are updated together by one optimizer.
struct ParamGroup {
  std::string name;
  std::vector<NamedParam> params;
  std::vector<Tensor> tensors() const;
  std::size_t count() const;
};

/// Stateful optimizer over one parameter group.  step() consumes the
/// gradients currently stored in the parameter tensors; it does not zero
/// them.  Non-finite gradients raise a numeric error before any parameter
/// is touched.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings);

  void attach(const ParamGroup& group);
  bool attached() const { return attached_; }

  /// lr_override < 0 keeps the configured rate.
  void step(ParamGroup& group, double lr_override = -1.0);

  const OptimizerSettings& settings() const { return settings_; }
  std::uint64_t step_count() const { return t_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

  /// First and (for Adam) second moment buffers, index-aligned with the
  /// attached group.
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  const std::vector<Tensor>& moment1() const { return m_; }
  const std::vector<Tensor>& moment2() const { return v_; }

 private:
  OptimizerSettings settings_;
  std::uint64_t t_ = 0;
  bool attached_ = false;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Global L2 norm over the gradients of the group.
double grad_norm(const ParamGroup& group);

enum class ScheduleKind { constant, step, cosine };

struct ScheduleSettings {
  ScheduleKind kind = ScheduleKind::constant;
  double gamma = 0.1;
  std::uint64_t period = 10;
  double lr_min = 0.0;
  std::uint64_t t_max = 0;
  bool operator==(const ScheduleSettings&) const = default;
};

/// Learning rate for 0-based epoch t:
///   constant: lr0
///   step:     lr0 * gamma^floor(t / period)
///   cosine:   lr_min + (lr0 - lr_min) * (1 + cos(pi * t / t_max)) / 2,
///             held at lr_min once t >= t_max
double scheduled_lr(double lr0, const ScheduleSettings& schedule, std::uint64_t t);

}  // namespace synthforge
