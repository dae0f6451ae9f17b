// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "synthforge/autodiff.hpp"
#include "synthforge/errors.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/tensor.hpp"

using namespace synthforge;

namespace {

Tensor random_tensor(Shape shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data_mut()) v = scale * rng.normal();
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  REQUIRE(a.numel() == b.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

}  // namespace

TEST_CASE("tensor construction and accessors") {
  Tensor z;
  CHECK(z.ndim() == 0);
  CHECK(z.numel() == 1);
  CHECK(z.value() == 0.0);

  Tensor t(Shape{2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.extent(0) == 2);
  CHECK(t.extent(1) == 3);
  for (double v : t.data()) CHECK(v == 0.0);

  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(m.at({0, 1}) == 2.0);
  CHECK(m.at({1, 0}) == 3.0);

  CHECK(Tensor::scalar(5.0).value() == 5.0);
  CHECK(Tensor::full(Shape{3}, 7.0).data()[2] == 7.0);

  CHECK_THROWS_AS(Tensor(Shape{2, 2}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 1, 1, 1}), DimensionError);
  CHECK_THROWS_AS(m.at({2, 0}), DimensionError);
  CHECK_THROWS_AS(m.extent(5), DimensionError);
  CHECK_THROWS_AS(Tensor::matrix({{1, 2}, {3}}), DimensionError);
}

TEST_CASE("tensor copies share storage, clone does not") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = a;
  CHECK(a.same_storage(b));
  b.data_mut()[0] = 99.0;
  CHECK(a.data()[0] == 99.0);

  Tensor c = a.clone();
  CHECK_FALSE(a.same_storage(c));
  c.data_mut()[0] = -1.0;
  CHECK(a.data()[0] == 99.0);
  CHECK_FALSE(c.has_grad());
}

TEST_CASE("gradient buffer lifecycle") {
  Tensor t(Shape{2});
  CHECK_FALSE(t.has_grad());
  CHECK_THROWS_AS(t.grad(), ArgumentError);
  t.set_requires_grad();
  CHECK(t.has_grad());
  t.grad()[0] = 3.0;
  t.zero_grad();
  CHECK(t.grad()[0] == 0.0);
}

TEST_CASE("reshaped view shares value and gradient buffers") {
  Tensor t(Shape{2, 3});
  t.set_requires_grad();
  Tensor v = t.view_reshaped(Shape{3, 2});
  CHECK(v.same_storage(t));
  CHECK(v.has_grad());
  v.data_mut()[5] = 42.0;
  CHECK(t.data()[5] == 42.0);
  v.grad()[1] = 7.0;
  CHECK(t.grad()[1] == 7.0);
  CHECK_THROWS_AS(t.view_reshaped(Shape{5}), DimensionError);
}

TEST_CASE("matmul forward oracle") {
  Tape tape;
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  Tensor c = tape.matmul(a, b);
  CHECK(c.at({0, 0}) == 19.0);
  CHECK(c.at({0, 1}) == 22.0);
  CHECK(c.at({1, 0}) == 43.0);
  CHECK(c.at({1, 1}) == 50.0);
  CHECK_THROWS_AS(tape.matmul(a, Tensor(Shape{3, 2})), DimensionError);
}

TEST_CASE("matmul backward matches hand derivation") {
  Tape tape;
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  a.set_requires_grad();
  b.set_requires_grad();
  Tensor loss = tape.sum(tape.matmul(a, b));
  tape.backward(loss);
  // d(sum(AB))/dA = ones * B^T, /dB = A^T * ones.
  CHECK(a.grad()[0] == doctest::Approx(11.0));
  CHECK(a.grad()[1] == doctest::Approx(15.0));
  CHECK(a.grad()[2] == doctest::Approx(11.0));
  CHECK(a.grad()[3] == doctest::Approx(15.0));
  CHECK(b.grad()[0] == doctest::Approx(4.0));
  CHECK(b.grad()[1] == doctest::Approx(4.0));
  CHECK(b.grad()[2] == doctest::Approx(6.0));
  CHECK(b.grad()[3] == doctest::Approx(6.0));
}

TEST_CASE("conv2d forward oracle 3x3 by 2x2 ones") {
  Tape tape;
  Tensor x(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k = Tensor::full(Shape{1, 1, 2, 2}, 1.0);
  Tensor y = tape.conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.data()[0] == 12.0);
  CHECK(y.data()[1] == 16.0);
  CHECK(y.data()[2] == 24.0);
  CHECK(y.data()[3] == 28.0);
}

TEST_CASE("conv2d stride and padding geometry") {
  Tape tape;
  Tensor x(Shape{2, 3, 8, 8});
  Tensor k(Shape{5, 3, 3, 3});
  CHECK(tape.conv2d(x, k, 2, 1).shape() == Shape{2, 5, 4, 4});
  CHECK(tape.conv2d(x, k, 1, 0).shape() == Shape{2, 5, 6, 6});
  CHECK_THROWS_AS(tape.conv2d(x, Tensor(Shape{5, 4, 3, 3}), 1, 0), DimensionError);
  CHECK_THROWS_AS(tape.conv2d(x, k, 0, 0), ArgumentError);
}

TEST_CASE("conv_transpose2d forward oracle upsamples blocks") {
  Tape tape;
  Tensor x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor k = Tensor::full(Shape{1, 1, 2, 2}, 1.0);
  Tensor y = tape.conv_transpose2d(x, k, 2, 0);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  const std::vector<double> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(y.data()[i] == want[i]);
}

TEST_CASE("conv_transpose2d inverts conv2d geometry") {
  Tape tape;
  Tensor x(Shape{1, 4, 8, 8});
  Tensor k(Shape{4, 2, 4, 4});
  Tensor y = tape.conv_transpose2d(x, k, 2, 1);
  CHECK(y.shape() == Shape{1, 2, 16, 16});
}

TEST_CASE("conv adjoint identity") {
  RngStream rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor(Shape{2, 3, 6, 6}, rng);
    Tensor k = random_tensor(Shape{4, 3, 3, 3}, rng, 0.5);
    Tape tape(false);
    Tensor y = tape.conv2d(x, k, 1, 1);
    Tensor cotangent = random_tensor(y.shape(), rng);
    Tensor pulled = tape.conv_transpose2d(cotangent, k, 1, 1);
    const double lhs = dot(y, cotangent);
    const double rhs = dot(x, pulled);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("broadcasting binary ops") {
  Tape tape;
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor row(Shape{2}, {10, 20});

  Tensor s = tape.add(a, row);
  CHECK(s.at({0, 0}) == 11.0);
  CHECK(s.at({1, 1}) == 24.0);

  Tensor d = tape.sub(a, Tensor::scalar(1.0));
  CHECK(d.at({0, 0}) == 0.0);

  Tensor p = tape.mul(row, a);  // broadcast works from either side
  CHECK(p.at({1, 0}) == 30.0);
  CHECK(p.at({1, 1}) == 80.0);

  CHECK_THROWS_AS(tape.add(a, Tensor(Shape{3})), DimensionError);
}

TEST_CASE("broadcast backward sums over the broadcast extent") {
  Tape tape;
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor row(Shape{2}, {10, 20});
  row.set_requires_grad();
  Tensor loss = tape.sum(tape.mul(a, row));
  tape.backward(loss);
  CHECK(row.grad()[0] == doctest::Approx(4.0));   // 1 + 3
  CHECK(row.grad()[1] == doctest::Approx(6.0));   // 2 + 4
}

TEST_CASE("gradient accumulates when a tensor is consumed twice") {
  Tape tape;
  Tensor x(Shape{3}, {1, 2, 3});
  x.set_requires_grad();
  Tensor y = tape.add(x, x);
  tape.backward(tape.sum(y));
  for (double g : std::vector<double>(x.grad().begin(), x.grad().end())) {
    CHECK(g == doctest::Approx(2.0));
  }
}

TEST_CASE("elementwise math and clamp") {
  Tape tape;
  Tensor x(Shape{3}, {-1.0, 0.5, 2.0});
  CHECK(tape.relu(x).data()[0] == 0.0);
  CHECK(tape.relu(x).data()[2] == 2.0);
  CHECK(tape.leaky_relu(x, 0.2).data()[0] == doctest::Approx(-0.2));
  CHECK(tape.sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
  CHECK(tape.tanh(Tensor::scalar(0.0)).value() == 0.0);
  CHECK(tape.exp(Tensor::scalar(1.0)).value() == doctest::Approx(std::exp(1.0)));
  CHECK(tape.square(x).data()[2] == 4.0);
  CHECK(tape.neg(x).data()[0] == 1.0);
  CHECK(tape.scale(x, 3.0).data()[1] == doctest::Approx(1.5));
  CHECK(tape.add_const(x, 1.0).data()[0] == 0.0);

  Tensor c = tape.clamp(x, 0.0, 1.0);
  CHECK(c.data()[0] == 0.0);
  CHECK(c.data()[1] == 0.5);
  CHECK(c.data()[2] == 1.0);
  CHECK_THROWS_AS(tape.clamp(x, 1.0, 0.0), ArgumentError);

  CHECK_THROWS_AS(tape.log(x), DomainError);
  CHECK(tape.log_clamped(Tensor::scalar(0.0)).value() == doctest::Approx(std::log(1e-7)));
  CHECK(tape.log(Tensor::scalar(1.0)).value() == 0.0);
}

TEST_CASE("clamp gradient is zero outside the open interval") {
  Tape tape;
  Tensor x(Shape{3}, {-1.0, 0.5, 2.0});
  x.set_requires_grad();
  tape.backward(tape.sum(tape.clamp(x, 0.0, 1.0)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("reductions") {
  Tape tape;
  Tensor x = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(tape.sum(x).value() == 21.0);
  CHECK(tape.mean(x).value() == doctest::Approx(3.5));

  Tensor cols = tape.sum(x, {0});
  CHECK(cols.shape() == Shape{3});
  CHECK(cols.data()[0] == 5.0);
  CHECK(cols.data()[2] == 9.0);

  Tensor rows = tape.mean(x, {1});
  CHECK(rows.shape() == Shape{2});
  CHECK(rows.data()[1] == doctest::Approx(5.0));

  CHECK_THROWS_AS(tape.sum(x, {7}), ArgumentError);
  CHECK_THROWS_AS(tape.sum(x, {0, 0}), ArgumentError);
}

TEST_CASE("reshape on tape is a storage-sharing view") {
  Tape tape;
  Tensor x(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad();
  Tensor r = tape.reshape(x, Shape{3, 2});
  CHECK(r.same_storage(x));
  tape.backward(tape.sum(tape.square(r)));
  CHECK(x.grad()[3] == doctest::Approx(8.0));
}

TEST_CASE("concat forward and backward") {
  Tape tape;
  Tensor a = Tensor::matrix({{1, 2}});
  Tensor b = Tensor::matrix({{3, 4}, {5, 6}});
  a.set_requires_grad();
  b.set_requires_grad();
  Tensor c = tape.concat({a, b}, 0);
  CHECK(c.shape() == Shape{3, 2});
  CHECK(c.at({2, 1}) == 6.0);

  Tensor w(Shape{3, 2}, {1, 10, 100, 1000, 10000, 100000});
  tape.backward(tape.sum(tape.mul(c, w)));
  CHECK(a.grad()[0] == doctest::Approx(1.0));
  CHECK(a.grad()[1] == doctest::Approx(10.0));
  CHECK(b.grad()[0] == doctest::Approx(100.0));
  CHECK(b.grad()[3] == doctest::Approx(100000.0));

  CHECK_THROWS_AS(tape.concat({}, 0), ArgumentError);
  CHECK_THROWS_AS(tape.concat({a, Tensor(Shape{1, 3})}, 0), DimensionError);
}

TEST_CASE("concat along the channel axis") {
  Tape tape;
  Tensor a(Shape{2, 1, 2, 2});
  Tensor b(Shape{2, 3, 2, 2});
  CHECK(tape.concat({a, b}, 1).shape() == Shape{2, 4, 2, 2});
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Tensor x(Shape{2}, {1, 2});
  x.set_requires_grad();
  Tensor y = tape.square(x);
  CHECK_THROWS_AS(tape.backward(y), ArgumentError);
}

TEST_CASE("non-recording tape stays empty") {
  Tape tape(false);
  Tensor x(Shape{2}, {1, 2});
  x.set_requires_grad();
  Tensor y = tape.square(x);
  CHECK(y.data()[1] == 4.0);
  CHECK(tape.op_count() == 0);
}

TEST_CASE("ops without gradient-carrying inputs record nothing") {
  Tape tape;
  Tensor x(Shape{2}, {1, 2});
  (void)tape.square(x);
  CHECK(tape.op_count() == 0);
}

TEST_CASE("grad_check across elementwise ops") {
  RngStream rng(101);
  Tensor x = random_tensor(Shape{2, 5}, rng);
  for (double& v : x.data_mut()) v = 0.3 + std::abs(v);  // keep log/sqrt-safe

  auto run = [&](auto f) {
    const GradCheckResult r = grad_check(f, x, 1e-6);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= 1e-6);
  };
  run([](Tape& t, const Tensor& v) { return t.sum(t.square(v)); });
  run([](Tape& t, const Tensor& v) { return t.sum(t.exp(t.scale(v, 0.5))); });
  run([](Tape& t, const Tensor& v) { return t.sum(t.log(v)); });
  run([](Tape& t, const Tensor& v) { return t.sum(t.sigmoid(v)); });
  run([](Tape& t, const Tensor& v) { return t.sum(t.tanh(v)); });
  run([](Tape& t, const Tensor& v) { return t.mean(t.mul(v, v)); });
  run([](Tape& t, const Tensor& v) { return t.sum(t.neg(t.add_const(v, 2.0))); });
}

TEST_CASE("grad_check flags relu kinks as excluded, not as errors") {
  Tensor x(Shape{3}, {-1.0, 0.0, 1.0});
  const GradCheckResult r = grad_check(
      [](Tape& t, const Tensor& v) { return t.sum(t.relu(v)); }, x, 1e-6);
  CHECK(r.excluded == std::vector<std::size_t>{1});
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("grad_check through matmul and conv stacks") {
  RngStream rng(202);
  {
    Tensor x = random_tensor(Shape{3, 4}, rng);
    Tensor w = random_tensor(Shape{4, 2}, rng);
    const GradCheckResult r = grad_check(
        [&](Tape& t, const Tensor& v) { return t.sum(t.square(t.matmul(v, w))); }, x, 1e-5);
    CHECK(r.max_rel_error <= 1e-6);
  }
  {
    Tensor x = random_tensor(Shape{1, 2, 5, 5}, rng);
    Tensor k = random_tensor(Shape{3, 2, 3, 3}, rng, 0.5);
    const GradCheckResult r = grad_check(
        [&](Tape& t, const Tensor& v) { return t.sum(t.square(t.conv2d(v, k, 2, 1))); }, x, 1e-5);
    CHECK(r.max_rel_error <= 1e-6);
    const GradCheckResult rk = grad_check(
        [&](Tape& t, const Tensor& v) { return t.sum(t.square(t.conv2d(x, v, 2, 1))); }, k, 1e-5);
    CHECK(rk.max_rel_error <= 1e-6);
  }
  {
    Tensor x = random_tensor(Shape{1, 3, 4, 4}, rng);
    Tensor k = random_tensor(Shape{3, 2, 4, 4}, rng, 0.5);
    const GradCheckResult r = grad_check(
        [&](Tape& t, const Tensor& v) {
          return t.sum(t.square(t.conv_transpose2d(v, k, 2, 1)));
        }, x, 1e-5);
    CHECK(r.max_rel_error <= 1e-6);
  }
}

TEST_CASE("grad_check through add_channel_bias and concat") {
  RngStream rng(303);
  Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng);
  Tensor bias = random_tensor(Shape{3}, rng);
  const GradCheckResult rb = grad_check(
      [&](Tape& t, const Tensor& v) { return t.sum(t.square(t.add_channel_bias(x, v))); },
      bias, 1e-5);
  CHECK(rb.max_rel_error <= 1e-6);

  Tensor per_sample = random_tensor(Shape{2, 3}, rng);
  const GradCheckResult rp = grad_check(
      [&](Tape& t, const Tensor& v) { return t.sum(t.square(t.add_channel_bias(x, v))); },
      per_sample, 1e-5);
  CHECK(rp.max_rel_error <= 1e-6);

  Tensor other = random_tensor(Shape{2, 4}, rng);
  const GradCheckResult rc = grad_check(
      [&](Tape& t, const Tensor& v) {
        return t.sum(t.square(t.concat({t.reshape(v, Shape{2, 48}), other}, 1)));
      }, x, 1e-5);
  CHECK(rc.max_rel_error <= 1e-6);
}
