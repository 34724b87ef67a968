#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "craft/rng.hpp"

namespace craft::nn {

/// Dense row-major f64 tensor.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  void zero();
  bool all_finite() const;
  bool operator==(const Tensor&) const = default;
};

/// y = W x + b with W stored out x in.
struct Linear {
  Tensor weight;
  Tensor bias;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
};

struct Embedding {
  Tensor table;  // one row per token
};

// Xavier-uniform weights U(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero bias.
Linear make_linear(std::size_t in, std::size_t out, RngStream& rng);
// U(-0.1, 0.1) entries.
Embedding make_embedding(std::size_t tokens, std::size_t dim, RngStream& rng);

/// Named handle to one parameter tensor; models expose their parameters as an
/// ordered list of these for the optimizer, serialization and gradient checks.
struct ParamRef {
  std::string name;
  Tensor* value;
};

// ---- single-sample layer API -------------------------------------------------

struct LinearCache {
  std::vector<double> x;
};

struct LinearGrads {
  std::vector<double> dx;
  Tensor dw;
  Tensor db;
};

std::vector<double> linear(const Linear& layer, std::span<const double> x, LinearCache* cache = nullptr);
LinearGrads linear_backward(const Linear& layer, const LinearCache& cache, std::span<const double> dy);

std::vector<double> tanh_forward(std::span<const double> x);
// dy * (1 - y^2) given the forward output y.
std::vector<double> tanh_backward(std::span<const double> y, std::span<const double> dy);

std::vector<double> concat_forward(std::span<const std::span<const double>> parts);
std::vector<std::vector<double>> concat_backward(std::span<const std::size_t> sizes, std::span<const double> dy);

double mse(std::span<const double> pred, std::span<const double> target);
std::vector<double> mse_backward(std::span<const double> pred, std::span<const double> target);

// ---- optimizer ---------------------------------------------------------------

struct AdamState {
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam(std::span<const ParamRef> params, double lr = 1e-3);

/// Bias-corrected Adam. Increments `state.step` first. Throws TrainingFault
/// naming the first parameter with a non-finite gradient, before any update.
void adam_step(std::span<const ParamRef> params, std::span<const ParamRef> grads, AdamState& state);

// FNV-1a over the raw parameter bytes.
std::uint64_t checksum(std::span<const ParamRef> params);

}  // namespace craft::nn
