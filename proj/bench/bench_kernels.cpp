// Serial reference kernels against the OpenMP versions on training-sized and
// larger batches.

#include <benchmark/benchmark.h>

#include "craft/kernels.hpp"

namespace {

using craft::nn::Linear;
using craft::nn::Tensor;

struct Problem {
  Tensor x, dy, y, dx;
  Linear layer, grad;
};

Problem make_problem(std::size_t batch, std::size_t in, std::size_t out) {
  craft::RngStream rng(5);
  Problem p;
  p.x = Tensor({batch, in});
  for (double& v : p.x.data) v = rng.uniform(-1.0, 1.0);
  p.dy = Tensor({batch, out});
  for (double& v : p.dy.data) v = rng.uniform(-1.0, 1.0);
  p.layer = craft::nn::make_linear(in, out, rng);
  p.grad = {Tensor(p.layer.weight.shape), Tensor(p.layer.bias.shape)};
  return p;
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  Problem p = make_problem(state.range(0), 320, 32);
  for (auto _ : state) {
    if constexpr (Parallel) craft::kernels::linear_forward(p.x, p.layer, p.y);
    else craft::kernels::serial::linear_forward(p.x, p.layer, p.y);
    benchmark::DoNotOptimize(p.y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_BackwardParams(benchmark::State& state) {
  Problem p = make_problem(state.range(0), 320, 32);
  for (auto _ : state) {
    if constexpr (Parallel) craft::kernels::linear_backward_params(p.x, p.dy, p.grad);
    else craft::kernels::serial::linear_backward_params(p.x, p.dy, p.grad);
    benchmark::DoNotOptimize(p.grad.weight.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& state) {
  Problem p = make_problem(state.range(0), 64, 64);
  for (auto _ : state) {
    if constexpr (Parallel) craft::kernels::linear_backward_input(p.dy, p.layer, p.dx);
    else craft::kernels::serial::linear_backward_input(p.dy, p.layer, p.dx);
    benchmark::DoNotOptimize(p.dx.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Arg(64)->Arg(1024);
BENCHMARK(BM_Forward<true>)->Arg(64)->Arg(1024);
BENCHMARK(BM_BackwardParams<false>)->Arg(64)->Arg(1024);
BENCHMARK(BM_BackwardParams<true>)->Arg(64)->Arg(1024);
BENCHMARK(BM_BackwardInput<false>)->Arg(64)->Arg(1024);
BENCHMARK(BM_BackwardInput<true>)->Arg(64)->Arg(1024);

BENCHMARK_MAIN();
