#include "doctest.h"

#include <omp.h>

#include <vector>

#include "craft/kernels.hpp"

using namespace craft;
using namespace craft::nn;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, RngStream& r) {
  Tensor t({rows, cols});
  for (double& v : t.data) v = r.uniform(-1, 1);
  return t;
}

struct Outputs {
  Tensor y, dx;
  Linear grad;
  Tensor t, dt;
};

template <bool Serial>
Outputs run(const Tensor& X, const Tensor& dY, const Linear& layer) {
  Outputs o;
  o.grad = {Tensor(layer.weight.shape), Tensor(layer.bias.shape)};
  // Accumulate onto non-zero gradients to cover the += contract.
  o.grad.weight.data.assign(o.grad.weight.size(), 0.125);
  if constexpr (Serial) {
    kernels::serial::linear_forward(X, layer, o.y);
    kernels::serial::linear_backward_input(dY, layer, o.dx);
    kernels::serial::linear_backward_params(X, dY, o.grad);
    o.t = o.y;
    kernels::serial::tanh_inplace(o.t);
    o.dt = dY;
    kernels::serial::tanh_backward_inplace(o.t, o.dt);
  } else {
    kernels::linear_forward(X, layer, o.y);
    kernels::linear_backward_input(dY, layer, o.dx);
    kernels::linear_backward_params(X, dY, o.grad);
    o.t = o.y;
    kernels::tanh_inplace(o.t);
    o.dt = dY;
    kernels::tanh_backward_inplace(o.t, o.dt);
  }
  return o;
}

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  RngStream r(31, "kernels");
  const int saved = omp_get_max_threads();
  for (std::size_t batch : {1u, 7u, 64u, 1024u}) {
    const Linear layer{random_tensor(64, 96, r), random_tensor(64, 1, r)};
    Linear flat = layer;
    flat.bias.shape = {64};
    const Tensor X = random_tensor(batch, 96, r);
    const Tensor dY = random_tensor(batch, 64, r);
    const Outputs ref = run<true>(X, dY, flat);
    for (int threads : {1, 2, 3, 4, 8}) {
      omp_set_num_threads(threads);
      const Outputs par = run<false>(X, dY, flat);
      CAPTURE(batch);
      CAPTURE(threads);
      CHECK(par.y == ref.y);
      CHECK(par.dx == ref.dx);
      CHECK(par.grad.weight == ref.grad.weight);
      CHECK(par.grad.bias == ref.grad.bias);
      CHECK(par.t == ref.t);
      CHECK(par.dt == ref.dt);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("batched kernels agree with the single-sample layer") {
  RngStream r(32);
  const Linear layer = make_linear(10, 6, r);
  const Tensor X = random_tensor(5, 10, r);
  Tensor Y;
  kernels::linear_forward(X, layer, Y);
  REQUIRE(Y.shape == std::vector<std::size_t>{5, 6});
  for (std::size_t b = 0; b < 5; ++b) {
    const auto y = linear(layer, X.row(b));
    for (std::size_t o = 0; o < 6; ++o) CHECK(Y(b, o) == doctest::Approx(y[o]).epsilon(1e-14));
  }

  const Tensor dY = random_tensor(5, 6, r);
  Linear grad{Tensor(layer.weight.shape), Tensor(layer.bias.shape)};
  kernels::linear_backward_params(X, dY, grad);
  Tensor dX;
  kernels::linear_backward_input(dY, layer, dX);
  Linear sum{Tensor(layer.weight.shape), Tensor(layer.bias.shape)};
  for (std::size_t b = 0; b < 5; ++b) {
    LinearCache cache;
    linear(layer, X.row(b), &cache);
    const LinearGrads g = linear_backward(layer, cache, dY.row(b));
    for (std::size_t i = 0; i < g.dw.size(); ++i) sum.weight.data[i] += g.dw.data[i];
    for (std::size_t i = 0; i < g.db.size(); ++i) sum.bias.data[i] += g.db.data[i];
    for (std::size_t i = 0; i < 10; ++i) CHECK(dX(b, i) == doctest::Approx(g.dx[i]).epsilon(1e-14));
  }
  for (std::size_t i = 0; i < sum.weight.size(); ++i)
    CHECK(grad.weight.data[i] == doctest::Approx(sum.weight.data[i]).epsilon(1e-13));
  for (std::size_t i = 0; i < sum.bias.size(); ++i)
    CHECK(grad.bias.data[i] == doctest::Approx(sum.bias.data[i]).epsilon(1e-13));
}
