#include <benchmark/benchmark.h>

#include <random>

#include "sscc/kernels.hpp"
#include "sscc/network.hpp"

using namespace sscc;
using kernels::Backend;

namespace {

std::vector<double> randn(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

void conv_forward(benchmark::State& state, Backend backend) {
  const int batch = int(state.range(0));
  kernels::ConvGeometry g{16, 32, 3, 1, 1};
  Tensor4 in(batch, 16, 13, 13);
  in.data = randn(in.data.size(), 1);
  auto w = randn(g.weight_count(), 2);
  auto b = randn(32, 3);
  Tensor4 out;
  for (auto _ : state) {
    kernels::conv2d_forward(backend, g, in, w, b, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void conv_backward(benchmark::State& state, Backend backend) {
  const int batch = int(state.range(0));
  kernels::ConvGeometry g{16, 32, 3, 1, 1};
  Tensor4 in(batch, 16, 13, 13);
  in.data = randn(in.data.size(), 1);
  auto w = randn(g.weight_count(), 2);
  Tensor4 go(batch, 32, 13, 13);
  go.data = randn(go.data.size(), 3);
  Tensor4 gi(in.n, in.c, in.h, in.w);
  std::vector<double> gw(w.size()), gb(32);
  for (auto _ : state) {
    kernels::conv2d_backward(backend, g, in, w, go, &gi, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void linear_forward(benchmark::State& state, Backend backend) {
  const int batch = int(state.range(0));
  Matrix in(batch, 128);
  auto v = randn(std::size_t(in.size()), 4);
  std::copy(v.begin(), v.end(), in.data());
  auto w = randn(128 * 256, 5);
  auto b = randn(256, 6);
  Matrix out;
  for (auto _ : state) {
    kernels::linear_forward(backend, in, w, b, 256, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

}  // namespace

BENCHMARK_CAPTURE(conv_forward, serial, Backend::serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(conv_forward, parallel, Backend::parallel)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(conv_backward, serial, Backend::serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(conv_backward, parallel, Backend::parallel)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(linear_forward, serial, Backend::serial)->Arg(64)->Arg(512);
BENCHMARK_CAPTURE(linear_forward, parallel, Backend::parallel)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
