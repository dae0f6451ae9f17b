// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/nn.hpp"

#include <cmath>

#include <fmt/format.h>

#include "synthforge/errors.hpp"

namespace synthforge {

Tensor apply_activation(Tape& tape, const Tensor& x, ActKind act, double alpha) {
  switch (act) {
    case ActKind::identity: return x;
    case ActKind::relu: return tape.relu(x);
    case ActKind::leaky_relu: return tape.leaky_relu(x, alpha);
    case ActKind::sigmoid: return tape.sigmoid(x);
    case ActKind::tanh: return tape.tanh(x);
  }
  throw ArgumentError("unknown activation kind");
}

Tensor Layer::forward(Tape& tape, const Tensor& x) const {
  switch (kind) {
    case LayerKind::dense:
      return dense_forward(tape, x, w, b);
    case LayerKind::conv2d:
      return tape.add_channel_bias(tape.conv2d(x, w, stride, pad), b);
    case LayerKind::conv_transpose2d:
      return tape.add_channel_bias(tape.conv_transpose2d(x, w, stride, pad), b);
    case LayerKind::activation:
      return apply_activation(tape, x, act, alpha);
  }
  throw ArgumentError("unknown layer kind");
}

Layer dense_layer(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ArgumentError("dense layer extents must be positive");
  Layer l;
  l.kind = LayerKind::dense;
  l.in_dim = in;
  l.out_dim = out;
  l.w = Tensor(Shape{in, out});
  l.b = Tensor(Shape{out});
  return l;
}

Layer conv2d_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in_ch == 0 || out_ch == 0 || k == 0) throw ArgumentError("conv layer extents must be positive");
  if (stride == 0) throw ArgumentError("conv layer stride must be at least 1");
  Layer l;
  l.kind = LayerKind::conv2d;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.ksize = k;
  l.stride = stride;
  l.pad = pad;
  l.w = Tensor(Shape{out_ch, in_ch, k, k});
  l.b = Tensor(Shape{out_ch});
  return l;
}

Layer conv_transpose2d_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in_ch == 0 || out_ch == 0 || k == 0) throw ArgumentError("conv layer extents must be positive");
  if (stride == 0) throw ArgumentError("conv layer stride must be at least 1");
  Layer l;
  l.kind = LayerKind::conv_transpose2d;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.ksize = k;
  l.stride = stride;
  l.pad = pad;
  l.w = Tensor(Shape{in_ch, out_ch, k, k});
  l.b = Tensor(Shape{out_ch});
  return l;
}

Layer activation_layer(ActKind act, double alpha) {
  Layer l;
  l.kind = LayerKind::activation;
  l.act = act;
  l.alpha = alpha;
  return l;
}

void init_params(Layer& layer, RngStream& rng) {
  switch (layer.kind) {
    case LayerKind::dense: {
      const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim));
      for (double& v : layer.w.data_mut()) v = (2.0 * rng.uniform01() - 1.0) * bound;
      for (double& v : layer.b.data_mut()) v = 0.0;
      break;
    }
    case LayerKind::conv2d:
    case LayerKind::conv_transpose2d: {
      for (double& v : layer.w.data_mut()) v = 0.02 * rng.normal();
      for (double& v : layer.b.data_mut()) v = 0.0;
      break;
    }
    case LayerKind::activation:
      break;
  }
}

Tensor dense_forward(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  return tape.add(tape.matmul(x, w), b);
}

Tensor time_embedding(std::uint64_t t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ArgumentError(fmt::format("time embedding dimension must be positive and even, got {}", dim));
  }
  Tensor out(Shape{dim});
  auto od = out.data_mut();
  const double td = static_cast<double>(t);
  for (std::size_t i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
    od[2 * i] = std::sin(td / freq);
    od[2 * i + 1] = std::cos(td / freq);
  }
  return out;
}

Tensor time_embedding_batch(const std::vector<std::uint64_t>& ts, std::size_t dim) {
  Tensor out(Shape{ts.size(), dim});
  auto od = out.data_mut();
  for (std::size_t r = 0; r < ts.size(); ++r) {
    Tensor row = time_embedding(ts[r], dim);
    std::copy(row.data().begin(), row.data().end(), od.begin() + r * dim);
  }
  return out;
}

void sgd_update(std::span<double> p, std::span<const double> g, std::span<double> v,
                double lr, double momentum) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

void adam_update(std::span<double> p, std::span<const double> g,
                 std::span<double> m, std::span<double> v, std::uint64_t t,
                 double lr, double beta1, double beta2, double eps) {
  if (t == 0) throw ArgumentError("adam step index is 1-based");
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

std::vector<Tensor> ParamGroup::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const NamedParam& p : params) out.push_back(p.tensor);
  return out;
}

std::size_t ParamGroup::count() const {
  std::size_t n = 0;
  for (const NamedParam& p : params) n += p.tensor.numel();
  return n;
}

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) {
  if (settings_.lr < 0.0) throw ArgumentError("learning rate must be non-negative");
  if (settings_.clip_norm < 0.0) throw ArgumentError("clip_norm must be non-negative");
}

void Optimizer::attach(const ParamGroup& group) {
  m_.clear();
  v_.clear();
  for (const NamedParam& p : group.params) {
    m_.emplace_back(p.tensor.shape());
    v_.emplace_back(p.tensor.shape());
  }
  t_ = 0;
  attached_ = true;
}

double grad_norm(const ParamGroup& group) {
  double acc = 0.0;
  for (const NamedParam& p : group.params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

void Optimizer::step(ParamGroup& group, double lr_override) {
  if (!attached_ || m_.size() != group.params.size()) {
    throw ArgumentError("optimizer not attached to this parameter group");
  }
  for (const NamedParam& p : group.params) {
    if (!p.tensor.has_grad()) {
      throw ArgumentError(fmt::format("parameter '{}' has no gradient buffer", p.name));
    }
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError(fmt::format("non-finite gradient in parameter '{}'", p.name));
      }
    }
  }

  double scale = 1.0;
  if (settings_.clip_norm > 0.0) {
    const double norm = grad_norm(group);
    if (norm > settings_.clip_norm) scale = settings_.clip_norm / norm;
  }

  const double lr = lr_override >= 0.0 ? lr_override : settings_.lr;
  ++t_;
  for (std::size_t i = 0; i < group.params.size(); ++i) {
    Tensor& p = group.params[i].tensor;
    std::vector<double> g(p.grad().begin(), p.grad().end());
    if (scale != 1.0) {
      for (double& gv : g) gv *= scale;
    }
    switch (settings_.kind) {
      case OptimizerKind::sgd:
        sgd_update(p.data_mut(), g, m_[i].data_mut(), lr, settings_.momentum);
        break;
      case OptimizerKind::adam:
        adam_update(p.data_mut(), g, m_[i].data_mut(), v_[i].data_mut(), t_,
                    lr, settings_.beta1, settings_.beta2, settings_.eps);
        break;
    }
  }
}

double scheduled_lr(double lr0, const ScheduleSettings& schedule, std::uint64_t t) {
  switch (schedule.kind) {
    case ScheduleKind::constant:
      return lr0;
    case ScheduleKind::step: {
      if (schedule.period == 0) throw ArgumentError("step schedule period must be positive");
      return lr0 * std::pow(schedule.gamma, static_cast<double>(t / schedule.period));
    }
    case ScheduleKind::cosine: {
      if (schedule.t_max == 0) throw ArgumentError("cosine schedule horizon must be positive");
      if (t >= schedule.t_max) return schedule.lr_min;
      const double frac = static_cast<double>(t) / static_cast<double>(schedule.t_max);
      return schedule.lr_min + (lr0 - schedule.lr_min) *
                                   (1.0 + std::cos(3.141592653589793238462643383279502884 * frac)) / 2.0;
    }
  }
  throw ArgumentError("unknown schedule kind");
}

}  // namespace synthforge
