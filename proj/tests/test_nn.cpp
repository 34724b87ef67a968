#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "craft/errors.hpp"
#include "craft/nn.hpp"

using namespace craft;
using namespace craft::nn;

namespace {

// Scalar probe loss L = sum_k c_k y_k for a linear layer.
double probe_loss(const Linear& l, std::span<const double> x, std::span<const double> c) {
  const auto y = linear(l, x);
  double s = 0;
  for (std::size_t k = 0; k < y.size(); ++k) s += c[k] * y[k];
  return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("identity layer passes input through") {
  Linear l{Tensor({3, 3}), Tensor({3})};
  for (int i = 0; i < 3; ++i) l.weight(i, i) = 1.0;
  const std::vector<double> x{0.5, -2.0, 7.25};
  CHECK(linear(l, x) == x);
  CHECK_THROWS_AS(linear(l, std::vector<double>{1.0, 2.0}), ContractViolation);
}

TEST_CASE("bias gradient equals the upstream gradient") {
  RngStream r(1);
  const Linear l = make_linear(4, 3, r);
  LinearCache cache;
  linear(l, std::vector<double>{1, 2, 3, 4}, &cache);
  const std::vector<double> dy{0.25, -1.5, 3.0};
  const LinearGrads g = linear_backward(l, cache, dy);
  CHECK(g.db.data == dy);
}

TEST_CASE("linear gradients match central differences") {
  RngStream r(2, "fd");
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    Linear l = make_linear(5, 4, r);
    for (double& b : l.bias.data) b = r.uniform(-1, 1);
    std::vector<double> x(5), c(4);
    for (double& v : x) v = r.uniform(-1, 1);
    for (double& v : c) v = r.uniform(-1, 1);
    LinearCache cache;
    linear(l, x, &cache);
    const LinearGrads g = linear_backward(l, cache, c);
    for (std::size_t i = 0; i < l.weight.size(); ++i) {
      Linear lp = l, lm = l;
      lp.weight.data[i] += h;
      lm.weight.data[i] -= h;
      CHECK(rel_err(g.dw.data[i], (probe_loss(lp, x, c) - probe_loss(lm, x, c)) / (2 * h)) < 1e-6);
    }
    for (std::size_t i = 0; i < l.bias.size(); ++i) {
      Linear lp = l, lm = l;
      lp.bias.data[i] += h;
      lm.bias.data[i] -= h;
      CHECK(rel_err(g.db.data[i], (probe_loss(lp, x, c) - probe_loss(lm, x, c)) / (2 * h)) < 1e-6);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      CHECK(rel_err(g.dx[i], (probe_loss(l, xp, c) - probe_loss(l, xm, c)) / (2 * h)) < 1e-6);
    }
  }
}

TEST_CASE("tanh, concat and mse") {
  const std::vector<double> zero{0.0};
  const auto y = tanh_forward(zero);
  CHECK(y[0] == 0.0);
  CHECK(tanh_backward(y, std::vector<double>{1.0})[0] == 1.0);

  RngStream r(3);
  for (int i = 0; i < 100; ++i) {
    const double x = r.uniform(-3, 3), h = 1e-6;
    const double fd = (std::tanh(x + h) - std::tanh(x - h)) / (2 * h);
    const std::vector<double> yx{std::tanh(x)};
    CHECK(rel_err(tanh_backward(yx, std::vector<double>{1.0})[0], fd) < 1e-8);
  }

  const std::vector<double> a{1, 2}, b{3};
  const std::vector<std::span<const double>> parts{a, b};
  CHECK(concat_forward(parts) == std::vector<double>{1, 2, 3});
  const std::vector<std::size_t> sizes{2, 1};
  const auto split = concat_backward(sizes, std::vector<double>{4, 5, 6});
  CHECK(split[0] == std::vector<double>{4, 5});
  CHECK(split[1] == std::vector<double>{6});

  const std::vector<double> p{1, 2}, t{0, 0};
  CHECK(mse(p, t) == 2.5);
  CHECK(mse(p, p) == 0.0);
  CHECK(mse_backward(p, t) == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(mse(p, std::vector<double>{0.0}), ContractViolation);
}

TEST_CASE("initializers respect their ranges") {
  RngStream r(4);
  const Linear l = make_linear(30, 20, r);
  const double a = std::sqrt(6.0 / 50.0);
  double max_abs = 0;
  for (double w : l.weight.data) max_abs = std::max(max_abs, std::abs(w));
  CHECK(max_abs <= a);
  CHECK(max_abs > 0.9 * a);
  for (double b : l.bias.data) CHECK(b == 0.0);
  const Embedding e = make_embedding(2, 16, r);
  CHECK(e.table.shape == std::vector<std::size_t>{2, 16});
  for (double v : e.table.data) CHECK(std::abs(v) <= 0.1);
}

TEST_CASE("Adam closed-form first step") {
  Tensor theta({1}, 0.0), grad({1}, 1.0);
  std::vector<ParamRef> p{{"theta", &theta}}, g{{"theta", &grad}};
  AdamState st = make_adam(p, 1e-3);
  adam_step(p, g, st);
  CHECK(st.step == 1);
  CHECK(std::abs(theta.data[0] - (-1e-3 * (1.0 / (1.0 + 1e-8)))) < 1e-18);
}

TEST_CASE("Adam leaves parameters alone under zero gradients") {
  RngStream r(5);
  Linear l = make_linear(3, 2, r);
  const Linear before = l;
  Tensor gw(l.weight.shape), gb(l.bias.shape);
  std::vector<ParamRef> p{{"w", &l.weight}, {"b", &l.bias}}, g{{"w", &gw}, {"b", &gb}};
  AdamState st = make_adam(p);
  for (int i = 0; i < 5; ++i) adam_step(p, g, st);
  CHECK(l.weight == before.weight);
  CHECK(l.bias == before.bias);
}

TEST_CASE("Adam treats parameters independently") {
  Tensor a({2}, 0.3), b({3}, 0.3);
  Tensor ga({2}), gb({3});
  std::vector<ParamRef> p{{"a", &a}, {"b", &b}}, g{{"a", &ga}, {"b", &gb}};
  AdamState st = make_adam(p, 0.01);
  RngStream r(6);
  for (int i = 0; i < 20; ++i) {
    const double v = r.normal();
    ga.data = {v, v};
    gb.data = {v, 0.5, v};
    adam_step(p, g, st);
  }
  CHECK(a.data[0] == b.data[0]);
  CHECK(a.data[1] == b.data[2]);
  CHECK(b.data[0] == b.data[2]);
}

TEST_CASE("non-finite gradients raise a training fault naming the parameter") {
  Tensor a({2}, 1.0), b({2}, 1.0), ga({2}, 0.5), gb({2}, 0.5);
  gb.data[1] = NAN;
  std::vector<ParamRef> p{{"trunk0.weight", &a}, {"trunk1.bias", &b}}, g{{"trunk0.weight", &ga}, {"trunk1.bias", &gb}};
  AdamState st = make_adam(p);
  try {
    adam_step(p, g, st);
    FAIL("expected a training fault");
  } catch (const TrainingFault& e) {
    CHECK(std::string(e.what()).find("trunk1.bias") != std::string::npos);
  }
  CHECK(a.data == std::vector<double>{1.0, 1.0});

  Tensor wrong({3});
  std::vector<ParamRef> bad{{"trunk0.weight", &wrong}, {"trunk1.bias", &gb}};
  CHECK_THROWS_AS(adam_step(p, bad, st), ContractViolation);
}

TEST_CASE("checksum reacts to single-bit changes") {
  Tensor a({4}, 0.25);
  std::vector<ParamRef> p{{"a", &a}};
  const auto c0 = checksum(p);
  CHECK(checksum(p) == c0);
  a.data[3] = std::nextafter(0.25, 1.0);
  CHECK(checksum(p) != c0);
}
