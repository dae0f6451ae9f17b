// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "synthforge/errors.hpp"

namespace synthforge {

namespace {

// C[M,N] (+)= op(A) * op(B).  Logical dims are post-transpose: op(A) is
// [M,K], op(B) is [K,N].  Plain triple loop, j innermost for locality.
void gemm(const double* a, const double* b, double* c,
          std::size_t m, std::size_t k, std::size_t n,
          bool trans_a, bool trans_b, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = trans_b ? nullptr : b + p * n;
      double* crow = c + i * n;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// Unfolds one image [C, img_h, img_w] into columns [C*kh*kw, grid_h*grid_w].
// Grid cell (gy, gx) reads the window anchored at (gy*stride - pad,
// gx*stride - pad); out-of-image taps contribute zero.
void im2col(const double* img, std::size_t c, std::size_t img_h, std::size_t img_w,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t grid_h, std::size_t grid_w, double* col) {
  const std::size_t l = grid_h * grid_w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = img + ch * img_h * img_w;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = col + ((ch * kh + ki) * kw + kj) * l;
        for (std::size_t gy = 0; gy < grid_h; ++gy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(gy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          const bool row_ok = iy >= 0 && iy < static_cast<std::ptrdiff_t>(img_h);
          for (std::size_t gx = 0; gx < grid_w; ++gx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(gx * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            row[gy * grid_w + gx] = (row_ok && ix >= 0 && ix < static_cast<std::ptrdiff_t>(img_w))
                                        ? plane[iy * static_cast<std::ptrdiff_t>(img_w) + ix]
                                        : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image buffer.
void col2im(const double* col, std::size_t c, std::size_t img_h, std::size_t img_w,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t grid_h, std::size_t grid_w, double* img) {
  const std::size_t l = grid_h * grid_w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = img + ch * img_h * img_w;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = col + ((ch * kh + ki) * kw + kj) * l;
        for (std::size_t gy = 0; gy < grid_h; ++gy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(gy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(img_h)) continue;
          for (std::size_t gx = 0; gx < grid_w; ++gx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(gx * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(img_w)) continue;
            plane[iy * static_cast<std::ptrdiff_t>(img_w) + ix] += row[gy * grid_w + gx];
          }
        }
      }
    }
  }
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  const std::size_t off = big.size() - small.size();
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (small[i] != big[off + i]) return false;
  }
  return true;
}

}  // namespace

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw DimensionError(fmt::format("matmul expects two rank-2 tensors, got {} and {}",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw DimensionError(fmt::format("matmul inner extents differ: {} vs {}",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  Tensor out(Shape{m, n});
  gemm(a.data().data(), b.data().data(), out.data_mut().data(), m, k, n, false, false, false);

  if (recording_ && (a.has_grad() || b.has_grad())) {
    out.ensure_grad();
    record([a = a, b = b, out = out, m, k, n]() mutable {
      const double* go = out.grad().data();
      if (a.has_grad()) {
        // dA += dOut * B^T
        gemm(go, b.data().data(), a.grad().data(), m, n, k, false, true, true);
      }
      if (b.has_grad()) {
        // dB += A^T * dOut
        gemm(a.data().data(), go, b.grad().data(), k, m, n, true, false, true);
      }
    });
  }
  return out;
}

Tensor Tape::conv2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t pad) {
  if (x.ndim() != 4 || kernel.ndim() != 4) {
    throw DimensionError(fmt::format("conv2d expects rank-4 input and kernel, got {} and {}",
                                     shape_str(x.shape()), shape_str(kernel.shape())));
  }
  if (stride == 0) throw ArgumentError("conv2d stride must be at least 1");
  const std::size_t n = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
  const std::size_t cout = kernel.extent(0), kcin = kernel.extent(1), kh = kernel.extent(2), kw = kernel.extent(3);
  if (cin != kcin) {
    throw DimensionError(fmt::format("conv2d channel mismatch: input {} has {} channels, kernel {} expects {}",
                                     shape_str(x.shape()), cin, shape_str(kernel.shape()), kcin));
  }
  if (h + 2 * pad < kh || w + 2 * pad < kw) {
    throw DimensionError(fmt::format("conv2d kernel {}x{} larger than padded input {}x{}",
                                     kh, kw, h + 2 * pad, w + 2 * pad));
  }
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
  const std::size_t ck = cin * kh * kw;
  const std::size_t l = ho * wo;

  Tensor out(Shape{n, cout, ho, wo});
  std::vector<double> col(ck * l);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.data().data() + s * cin * h * w, cin, h, w, kh, kw, stride, pad, ho, wo, col.data());
    gemm(kernel.data().data(), col.data(), out.data_mut().data() + s * cout * l,
         cout, ck, l, false, false, false);
  }

  if (recording_ && (x.has_grad() || kernel.has_grad())) {
    out.ensure_grad();
    record([x = x, kernel = kernel, out = out, n, cin, h, w, cout, kh, kw, stride, pad, ho, wo, ck, l]() mutable {
      std::vector<double> col(ck * l);
      std::vector<double> dcol(ck * l);
      for (std::size_t s = 0; s < n; ++s) {
        const double* go = out.grad().data() + s * cout * l;
        if (kernel.has_grad()) {
          im2col(x.data().data() + s * cin * h * w, cin, h, w, kh, kw, stride, pad, ho, wo, col.data());
          // dK += dOut * col^T
          gemm(go, col.data(), kernel.grad().data(), cout, l, ck, false, true, true);
        }
        if (x.has_grad()) {
          // dcol = K^T * dOut, then scatter back into dX
          gemm(kernel.data().data(), go, dcol.data(), ck, cout, l, true, false, false);
          col2im(dcol.data(), cin, h, w, kh, kw, stride, pad, ho, wo,
                 x.grad().data() + s * cin * h * w);
        }
      }
    });
  }
  return out;
}

Tensor Tape::conv_transpose2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t pad) {
  if (x.ndim() != 4 || kernel.ndim() != 4) {
    throw DimensionError(fmt::format("conv_transpose2d expects rank-4 input and kernel, got {} and {}",
                                     shape_str(x.shape()), shape_str(kernel.shape())));
  }
  if (stride == 0) throw ArgumentError("conv_transpose2d stride must be at least 1");
  const std::size_t n = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
  const std::size_t kcin = kernel.extent(0), cout = kernel.extent(1), kh = kernel.extent(2), kw = kernel.extent(3);
  if (cin != kcin) {
    throw DimensionError(fmt::format("conv_transpose2d channel mismatch: input {} has {} channels, kernel {} expects {}",
                                     shape_str(x.shape()), cin, shape_str(kernel.shape()), kcin));
  }
  const std::ptrdiff_t ho_s = static_cast<std::ptrdiff_t>((h - 1) * stride + kh) - 2 * static_cast<std::ptrdiff_t>(pad);
  const std::ptrdiff_t wo_s = static_cast<std::ptrdiff_t>((w - 1) * stride + kw) - 2 * static_cast<std::ptrdiff_t>(pad);
  if (ho_s < 1 || wo_s < 1) {
    throw DimensionError(fmt::format("conv_transpose2d output extent {}x{} is empty for input {} with kernel {}x{}, stride {}, pad {}",
                                     ho_s, wo_s, shape_str(x.shape()), kh, kw, stride, pad));
  }
  const std::size_t ho = static_cast<std::size_t>(ho_s), wo = static_cast<std::size_t>(wo_s);
  const std::size_t ck = cout * kh * kw;
  const std::size_t l = h * w;

  Tensor out(Shape{n, cout, ho, wo});
  std::vector<double> col(ck * l);
  for (std::size_t s = 0; s < n; ++s) {
    // col = K^T * x, K viewed as [Cin, Cout*kh*kw]
    gemm(kernel.data().data(), x.data().data() + s * cin * l, col.data(),
         ck, cin, l, true, false, false);
    col2im(col.data(), cout, ho, wo, kh, kw, stride, pad, h, w,
           out.data_mut().data() + s * cout * ho * wo);
  }

  if (recording_ && (x.has_grad() || kernel.has_grad())) {
    out.ensure_grad();
    record([x = x, kernel = kernel, out = out, n, cin, h, w, cout, kh, kw, stride, pad, ho, wo, ck, l]() mutable {
      std::vector<double> dcol(ck * l);
      for (std::size_t s = 0; s < n; ++s) {
        im2col(out.grad().data() + s * cout * ho * wo, cout, ho, wo, kh, kw, stride, pad, h, w, dcol.data());
        if (kernel.has_grad()) {
          // dK += x * dcol^T, K viewed as [Cin, Cout*kh*kw]
          gemm(x.data().data() + s * cin * l, dcol.data(), kernel.grad().data(),
               cin, l, ck, false, true, true);
        }
        if (x.has_grad()) {
          // dX += K * dcol
          gemm(kernel.data().data(), dcol.data(), x.grad().data() + s * cin * l,
               cin, ck, l, false, false, true);
        }
      }
    });
  }
  return out;
}

template <typename Fwd, typename Drv>
Tensor Tape::unary_op(const Tensor& x, Fwd&& fwd, Drv&& deriv) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.data_mut();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = fwd(xd[i]);

  if (recording_ && x.has_grad()) {
    out.ensure_grad();
    record([x = x, out = out, deriv]() mutable {
      auto xd = x.data();
      auto od = out.data();
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < xd.size(); ++i) gx[i] += go[i] * deriv(xd[i], od[i]);
    });
  }
  return out;
}

Tensor Tape::relu(const Tensor& x) {
  return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Tape::leaky_relu(const Tensor& x, double alpha) {
  return unary_op(x, [alpha](double v) { return v > 0.0 ? v : alpha * v; },
                  [alpha](double v, double) { return v > 0.0 ? 1.0 : alpha; });
}

Tensor Tape::sigmoid(const Tensor& x) {
  return unary_op(x,
                  [](double v) {
                    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                    : std::exp(v) / (1.0 + std::exp(v));
                  },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor Tape::tanh(const Tensor& x) {
  return unary_op(x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor Tape::exp(const Tensor& x) {
  return unary_op(x, [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor Tape::log(const Tensor& x) {
  for (double v : x.data()) {
    if (v <= 0.0) throw DomainError(fmt::format("log of non-positive value {}", v));
  }
  return unary_op(x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor Tape::log_clamped(const Tensor& x, double eps) {
  if (eps <= 0.0) throw ArgumentError("log_clamped eps must be positive");
  return unary_op(x, [eps](double v) { return std::log(v > eps ? v : eps); },
                  [eps](double v, double) { return v > eps ? 1.0 / v : 0.0; });
}

Tensor Tape::neg(const Tensor& x) {
  return unary_op(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor Tape::scale(const Tensor& x, double c) {
  return unary_op(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor Tape::add_const(const Tensor& x, double c) {
  return unary_op(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor Tape::clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ArgumentError(fmt::format("clamp bounds out of order: [{}, {}]", lo, hi));
  return unary_op(x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
                  [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor Tape::square(const Tensor& x) {
  return unary_op(x, [](double v) { return v * v; },
                  [](double v, double) { return 2.0 * v; });
}

Tensor Tape::binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  const Tensor* big = nullptr;
  const Tensor* small = nullptr;
  bool a_is_big = true;
  if (a.shape() == b.shape() || b.numel() == 1 || is_suffix(b.shape(), a.shape())) {
    big = &a;
    small = &b;
    a_is_big = true;
  } else if (a.numel() == 1 || is_suffix(a.shape(), b.shape())) {
    big = &b;
    small = &a;
    a_is_big = false;
  } else {
    throw DimensionError(fmt::format("shapes {} and {} are not broadcast-compatible",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  const std::size_t s_count = small->numel();
  const std::size_t p_count = big->numel() / (s_count == 0 ? 1 : s_count);
  if (s_count == 0) {
    throw DimensionError(fmt::format("cannot broadcast empty tensor {}", shape_str(small->shape())));
  }

  Tensor out(big->shape());
  {
    auto bd = big->data();
    auto sd = small->data();
    auto od = out.data_mut();
    for (std::size_t p = 0; p < p_count; ++p) {
      for (std::size_t s = 0; s < s_count; ++s) {
        const std::size_t i = p * s_count + s;
        const double av = a_is_big ? bd[i] : sd[s];
        const double bv = a_is_big ? sd[s] : bd[i];
        switch (kind) {
          case BinKind::add: od[i] = av + bv; break;
          case BinKind::sub: od[i] = av - bv; break;
          case BinKind::mul: od[i] = av * bv; break;
        }
      }
    }
  }

  if (recording_ && (a.has_grad() || b.has_grad())) {
    out.ensure_grad();
    Tensor big_t = *big;
    Tensor small_t = *small;
    record([big_t, small_t, out, a_is_big, s_count, p_count, kind]() mutable {
      auto go = out.grad();
      auto bd = big_t.data();
      auto sd = small_t.data();
      for (std::size_t p = 0; p < p_count; ++p) {
        for (std::size_t s = 0; s < s_count; ++s) {
          const std::size_t i = p * s_count + s;
          double dbig = 0.0, dsmall = 0.0;
          switch (kind) {
            case BinKind::add:
              dbig = 1.0;
              dsmall = 1.0;
              break;
            case BinKind::sub:
              dbig = a_is_big ? 1.0 : -1.0;
              dsmall = a_is_big ? -1.0 : 1.0;
              break;
            case BinKind::mul:
              dbig = sd[s];
              dsmall = bd[i];
              break;
          }
          if (big_t.has_grad()) big_t.grad()[i] += go[i] * dbig;
          if (small_t.has_grad()) small_t.grad()[s] += go[i] * dsmall;
        }
      }
    });
  }
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::add); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::sub); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::mul); }

Tensor Tape::add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.ndim() != 4) {
    throw DimensionError(fmt::format("add_channel_bias expects a rank-4 input, got {}", shape_str(x.shape())));
  }
  const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  const bool per_sample = bias.ndim() == 2;
  if (per_sample) {
    if (bias.extent(0) != n || bias.extent(1) != c) {
      throw DimensionError(fmt::format("bias {} does not match input {} (expected [{}, {}])",
                                       shape_str(bias.shape()), shape_str(x.shape()), n, c));
    }
  } else if (bias.ndim() != 1 || bias.extent(0) != c) {
    throw DimensionError(fmt::format("bias {} does not match input {} (expected [{}] or [{}, {}])",
                                     shape_str(bias.shape()), shape_str(x.shape()), c, n, c));
  }
  const std::size_t hw = h * w;

  Tensor out(x.shape());
  {
    auto xd = x.data();
    auto bd = bias.data();
    auto od = out.data_mut();
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double bv = per_sample ? bd[s * c + ch] : bd[ch];
        const std::size_t base = (s * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) od[base + i] = xd[base + i] + bv;
      }
    }
  }

  if (recording_ && (x.has_grad() || bias.has_grad())) {
    out.ensure_grad();
    record([x = x, bias = bias, out = out, n, c, hw, per_sample]() mutable {
      auto go = out.grad();
      if (x.has_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (bias.has_grad()) {
        auto gb = bias.grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (s * c + ch) * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += go[base + i];
            gb[per_sample ? s * c + ch : ch] += acc;
          }
        }
      }
    });
  }
  return out;
}

Tensor Tape::sum(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& in_shape = x.shape();
  std::vector<bool> reduce(in_shape.size(), false);
  if (axes.empty()) {
    std::fill(reduce.begin(), reduce.end(), true);
  } else {
    for (std::size_t a : axes) {
      if (a >= in_shape.size()) {
        throw ArgumentError(fmt::format("reduction axis {} out of range for shape {}", a, shape_str(in_shape)));
      }
      if (reduce[a]) throw ArgumentError(fmt::format("duplicate reduction axis {}", a));
      reduce[a] = true;
    }
  }
  Shape out_shape;
  for (std::size_t i = 0; i < in_shape.size(); ++i) {
    if (!reduce[i]) out_shape.push_back(in_shape[i]);
  }

  const Shape in_strides = shape_strides(in_shape);
  const Shape out_strides = shape_strides(out_shape);
  // Per input axis: the stride of the matching output axis, or 0 if reduced.
  Shape map_strides(in_shape.size(), 0);
  {
    std::size_t o = 0;
    for (std::size_t i = 0; i < in_shape.size(); ++i) {
      if (!reduce[i]) map_strides[i] = out_strides[o++];
    }
  }

  auto out_index = [in_shape, in_strides, map_strides](std::size_t flat) {
    std::size_t oi = 0;
    for (std::size_t ax = 0; ax < in_shape.size(); ++ax) {
      const std::size_t coord = (flat / in_strides[ax]) % in_shape[ax];
      oi += coord * map_strides[ax];
    }
    return oi;
  };

  Tensor out(out_shape);
  {
    auto xd = x.data();
    auto od = out.data_mut();
    for (std::size_t i = 0; i < xd.size(); ++i) od[out_index(i)] += xd[i];
  }

  if (recording_ && x.has_grad()) {
    out.ensure_grad();
    record([x = x, out = out, out_index]() mutable {
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[out_index(i)];
    });
  }
  return out;
}

Tensor Tape::mean(const Tensor& x, const std::vector<std::size_t>& axes) {
  Tensor s = sum(x, axes);
  const std::size_t count = s.numel() ? x.numel() / s.numel() : 0;
  if (count == 0) throw DimensionError(fmt::format("mean over empty extent in shape {}", shape_str(x.shape())));
  return scale(s, 1.0 / static_cast<double>(count));
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  // The view shares value and gradient storage, so adjoints flow through
  // with no recorded op.
  return x.view_reshaped(std::move(shape));
}

Tensor Tape::concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat needs at least one input");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw ArgumentError(fmt::format("concat axis {} out of range for shape {}", axis, shape_str(first)));
  }
  Shape out_shape = first;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != first.size()) {
      throw DimensionError(fmt::format("concat rank mismatch: {} vs {}", shape_str(first), shape_str(p.shape())));
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && p.shape()[i] != first[i]) {
        throw DimensionError(fmt::format("concat extent mismatch on axis {}: {} vs {}",
                                         i, shape_str(first), shape_str(p.shape())));
      }
    }
    total += p.shape()[axis];
  }
  out_shape[axis] = total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
  for (std::size_t i = axis + 1; i < out_shape.size(); ++i) inner *= out_shape[i];

  Tensor out(out_shape);
  {
    auto od = out.data_mut();
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      const std::size_t rows = p.shape()[axis] * inner;
      auto pd = p.data();
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy(pd.begin() + o * rows, pd.begin() + (o + 1) * rows,
                  od.begin() + o * total * inner + offset);
      }
      offset += rows;
    }
  }

  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.has_grad();
  if (recording_ && any_grad && outer > 0) {
    out.ensure_grad();
    std::vector<Tensor> held = parts;
    record([held, out, outer, inner, total]() mutable {
      auto go = out.grad();
      std::size_t offset = 0;
      for (Tensor& p : held) {
        const std::size_t rows = p.numel() / outer;
        if (p.has_grad()) {
          auto gp = p.grad();
          for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t src = o * total * inner + offset;
            for (std::size_t i = 0; i < rows; ++i) gp[o * rows + i] += go[src + i];
          }
        }
        offset += rows;
      }
    });
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ArgumentError(fmt::format("backward requires a single-element loss, got shape {}",
                                    shape_str(loss.shape())));
  }
  Tensor seed = loss;
  seed.ensure_grad();
  seed.grad()[0] += 1.0;
  for (std::size_t i = ops_.size(); i-- > 0;) ops_[i]();
}

GradCheckResult grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                           const Tensor& x, double h) {
  if (h <= 0.0) throw ArgumentError("grad_check step must be positive");

  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  Tape tape;
  Tensor y = f(tape, leaf);
  if (y.numel() != 1) {
    throw ArgumentError(fmt::format("grad_check target must return a single-element tensor, got {}",
                                    shape_str(y.shape())));
  }
  tape.backward(y);
  std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());

  auto eval = [&f](const Tensor& probe) {
    Tape t(false);
    return f(t, probe).value();
  };

  const double f0 = eval(x);
  if (!std::isfinite(f0)) throw NumericError("grad_check: function value is not finite");

  GradCheckResult result;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    Tensor xp = x.clone();
    Tensor xm = x.clone();
    xp.data_mut()[i] += h;
    xm.data_mut()[i] -= h;
    const double fp = eval(xp);
    const double fm = eval(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic[i])) {
      throw NumericError(fmt::format("grad_check: non-finite value at coordinate {}", i));
    }
    const double fwd = (fp - f0) / h;
    const double bwd = (f0 - fm) / h;
    if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fwd) + std::abs(bwd))) {
      result.excluded.push_back(i);
      continue;
    }
    const double central = (fp - fm) / (2.0 * h);
    const double rel = std::abs(analytic[i] - central) / std::max(1.0, std::abs(analytic[i]));
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace synthforge
