#include "craft/nn.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "craft/errors.hpp"
#include "craft/kernels.hpp"

namespace craft::nn {

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)),
      data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}

void Tensor::zero() { std::fill(data.begin(), data.end(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Linear make_linear(std::size_t in, std::size_t out, RngStream& rng) {
  Linear l{Tensor({out, in}), Tensor({out})};
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : l.weight.data) w = rng.uniform(-a, a);
  return l;
}

Embedding make_embedding(std::size_t tokens, std::size_t dim, RngStream& rng) {
  Embedding e{Tensor({tokens, dim})};
  for (double& w : e.table.data) w = rng.uniform(-0.1, 0.1);
  return e;
}

std::vector<double> linear(const Linear& layer, std::span<const double> x, LinearCache* cache) {
  if (x.size() != layer.in()) throw ContractViolation("linear: input has wrong length");
  Tensor X({1, x.size()});
  std::copy(x.begin(), x.end(), X.data.begin());
  Tensor Y;
  kernels::serial::linear_forward(X, layer, Y);
  if (cache) cache->x.assign(x.begin(), x.end());
  return Y.data;
}

LinearGrads linear_backward(const Linear& layer, const LinearCache& cache, std::span<const double> dy) {
  if (dy.size() != layer.out() || cache.x.size() != layer.in())
    throw ContractViolation("linear_backward: shape mismatch");
  Tensor X({1, cache.x.size()});
  X.data = cache.x;
  Tensor dY({1, dy.size()});
  std::copy(dy.begin(), dy.end(), dY.data.begin());
  Linear grad{Tensor(layer.weight.shape), Tensor(layer.bias.shape)};
  kernels::serial::linear_backward_params(X, dY, grad);
  Tensor dX;
  kernels::serial::linear_backward_input(dY, layer, dX);
  return {dX.data, std::move(grad.weight), std::move(grad.bias)};
}

std::vector<double> tanh_forward(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

std::vector<double> tanh_backward(std::span<const double> y, std::span<const double> dy) {
  if (y.size() != dy.size()) throw ContractViolation("tanh_backward: shape mismatch");
  std::vector<double> dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
  return dx;
}

std::vector<double> concat_forward(std::span<const std::span<const double>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<std::vector<double>> concat_backward(std::span<const std::size_t> sizes, std::span<const double> dy) {
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != dy.size())
    throw ContractViolation("concat_backward: sizes do not cover the gradient");
  std::vector<std::vector<double>> out;
  std::size_t off = 0;
  for (std::size_t n : sizes) {
    out.emplace_back(dy.begin() + off, dy.begin() + off + n);
    off += n;
  }
  return out;
}

double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw ContractViolation("mse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

std::vector<double> mse_backward(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw ContractViolation("mse_backward: shape mismatch");
  std::vector<double> g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

AdamState make_adam(std::span<const ParamRef> params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& p : params) {
    s.m.emplace_back(p.value->shape);
    s.v.emplace_back(p.value->shape);
  }
  return s;
}

void adam_step(std::span<const ParamRef> params, std::span<const ParamRef> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractViolation("adam_step: parameter and gradient lists differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].value->size() != params[k].value->size())
      throw ContractViolation("adam_step: gradient shape mismatch for " + params[k].name);
    if (!grads[k].value->all_finite()) throw TrainingFault("non-finite gradient in " + params[k].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k].value->data;
    const auto& g = grads[k].value->data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

std::uint64_t checksum(std::span<const ParamRef> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    for (double v : p.value->data) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace craft::nn
