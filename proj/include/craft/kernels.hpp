#pragma once

// Batched dense kernels. The default versions parallelize with OpenMP over
// output elements; every output element is reduced in the same fixed order as
// the serial reference, so both produce bit-identical results for any thread
// count. The serial versions are kept for tests and benchmarks.

#include "craft/nn.hpp"

namespace craft::kernels {

// Y[b, o] = b[o] + sum_i W[o, i] X[b, i]
void linear_forward(const nn::Tensor& X, const nn::Linear& layer, nn::Tensor& Y);
// dX[b, i] = sum_o dY[b, o] W[o, i]
void linear_backward_input(const nn::Tensor& dY, const nn::Linear& layer, nn::Tensor& dX);
// dW[o, i] += sum_b dY[b, o] X[b, i];  db[o] += sum_b dY[b, o]
void linear_backward_params(const nn::Tensor& X, const nn::Tensor& dY, nn::Linear& grad);
void tanh_inplace(nn::Tensor& Y);
// dY *= 1 - Y^2
void tanh_backward_inplace(const nn::Tensor& Y, nn::Tensor& dY);

namespace serial {
void linear_forward(const nn::Tensor& X, const nn::Linear& layer, nn::Tensor& Y);
void linear_backward_input(const nn::Tensor& dY, const nn::Linear& layer, nn::Tensor& dX);
void linear_backward_params(const nn::Tensor& X, const nn::Tensor& dY, nn::Linear& grad);
void tanh_inplace(nn::Tensor& Y);
void tanh_backward_inplace(const nn::Tensor& Y, nn::Tensor& dY);
}  // namespace serial

}  // namespace craft::kernels
