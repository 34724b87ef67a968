#include "craft/kernels.hpp"

#include <cmath>

#include <omp.h>

#include "craft/errors.hpp"

namespace craft::kernels {
namespace {

using nn::Linear;
using nn::Tensor;

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

bool go_parallel(std::size_t work) { return work >= kParallelWork && !omp_in_parallel(); }

void check_forward(const Tensor& X, const Linear& layer) {
  if (X.shape.size() != 2 || X.cols() != layer.in()) throw ContractViolation("linear: input width mismatch");
}

void shape_output(Tensor& Y, std::size_t rows, std::size_t cols) {
  if (Y.shape.size() != 2 || Y.rows() != rows || Y.cols() != cols) Y = Tensor({rows, cols});
}

// Per-element bodies shared by both variants.
inline double forward_elem(const Tensor& X, const Linear& L, std::size_t b, std::size_t o) {
  const std::size_t in = L.in();
  const double* x = X.data.data() + b * in;
  const double* w = L.weight.data.data() + o * in;
  double acc = 0.0;
  for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
  return L.bias.data[o] + acc;
}

inline double input_grad_elem(const Tensor& dY, const Linear& L, std::size_t b, std::size_t i) {
  const std::size_t out = L.out(), in = L.in();
  const double* dy = dY.data.data() + b * out;
  double acc = 0.0;
  for (std::size_t o = 0; o < out; ++o) acc += dy[o] * L.weight.data[o * in + i];
  return acc;
}

inline double weight_grad_elem(const Tensor& X, const Tensor& dY, std::size_t o, std::size_t i) {
  const std::size_t B = X.rows(), in = X.cols(), out = dY.cols();
  double acc = 0.0;
  for (std::size_t b = 0; b < B; ++b) acc += dY.data[b * out + o] * X.data[b * in + i];
  return acc;
}

inline double bias_grad_elem(const Tensor& dY, std::size_t o) {
  const std::size_t B = dY.rows(), out = dY.cols();
  double acc = 0.0;
  for (std::size_t b = 0; b < B; ++b) acc += dY.data[b * out + o];
  return acc;
}

void check_backward_params(const Tensor& X, const Tensor& dY, const Linear& grad) {
  if (X.rows() != dY.rows() || X.cols() != grad.in() || dY.cols() != grad.out())
    throw ContractViolation("linear_backward: shape mismatch");
}

}  // namespace

void linear_forward(const Tensor& X, const Linear& layer, Tensor& Y) {
  check_forward(X, layer);
  const std::size_t B = X.rows(), out = layer.out();
  shape_output(Y, B, out);
  const auto n = static_cast<std::ptrdiff_t>(B * out);
#pragma omp parallel for schedule(static) if (go_parallel(B * out * layer.in()))
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto b = static_cast<std::size_t>(k) / out, o = static_cast<std::size_t>(k) % out;
    Y.data[k] = forward_elem(X, layer, b, o);
  }
}

void linear_backward_input(const Tensor& dY, const Linear& layer, Tensor& dX) {
  const std::size_t B = dY.rows(), in = layer.in();
  shape_output(dX, B, in);
  const auto n = static_cast<std::ptrdiff_t>(B * in);
#pragma omp parallel for schedule(static) if (go_parallel(B * in * layer.out()))
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto b = static_cast<std::size_t>(k) / in, i = static_cast<std::size_t>(k) % in;
    dX.data[k] = input_grad_elem(dY, layer, b, i);
  }
}

void linear_backward_params(const Tensor& X, const Tensor& dY, Linear& grad) {
  check_backward_params(X, dY, grad);
  const std::size_t in = grad.in(), out = grad.out();
  const auto n = static_cast<std::ptrdiff_t>(out * in);
#pragma omp parallel for schedule(static) if (go_parallel(out * in * X.rows()))
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto o = static_cast<std::size_t>(k) / in, i = static_cast<std::size_t>(k) % in;
    grad.weight.data[k] += weight_grad_elem(X, dY, o, i);
  }
  for (std::size_t o = 0; o < out; ++o) grad.bias.data[o] += bias_grad_elem(dY, o);
}

void tanh_inplace(Tensor& Y) {
  const auto n = static_cast<std::ptrdiff_t>(Y.size());
#pragma omp parallel for schedule(static) if (go_parallel(Y.size() * 16))
  for (std::ptrdiff_t k = 0; k < n; ++k) Y.data[k] = std::tanh(Y.data[k]);
}

void tanh_backward_inplace(const Tensor& Y, Tensor& dY) {
  const auto n = static_cast<std::ptrdiff_t>(Y.size());
#pragma omp parallel for schedule(static) if (go_parallel(Y.size() * 4))
  for (std::ptrdiff_t k = 0; k < n; ++k) dY.data[k] *= 1.0 - Y.data[k] * Y.data[k];
}

namespace serial {

void linear_forward(const Tensor& X, const Linear& layer, Tensor& Y) {
  check_forward(X, layer);
  const std::size_t B = X.rows(), out = layer.out();
  shape_output(Y, B, out);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out; ++o) Y.data[b * out + o] = forward_elem(X, layer, b, o);
}

void linear_backward_input(const Tensor& dY, const Linear& layer, Tensor& dX) {
  const std::size_t B = dY.rows(), in = layer.in();
  shape_output(dX, B, in);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < in; ++i) dX.data[b * in + i] = input_grad_elem(dY, layer, b, i);
}

void linear_backward_params(const Tensor& X, const Tensor& dY, Linear& grad) {
  check_backward_params(X, dY, grad);
  const std::size_t in = grad.in(), out = grad.out();
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i) grad.weight.data[o * in + i] += weight_grad_elem(X, dY, o, i);
  for (std::size_t o = 0; o < out; ++o) grad.bias.data[o] += bias_grad_elem(dY, o);
}

void tanh_inplace(Tensor& Y) {
  for (double& v : Y.data) v = std::tanh(v);
}

void tanh_backward_inplace(const Tensor& Y, Tensor& dY) {
  for (std::size_t k = 0; k < Y.size(); ++k) dY.data[k] *= 1.0 - Y.data[k] * Y.data[k];
}

}  // namespace serial
}  // namespace craft::kernels
