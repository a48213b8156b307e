// Reference (serial, direct) kernels against the OpenMP + BLAS path that the
// layers use. Shapes are taken from the tiny_cnn and resnet34 backbones.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "xrs/kernels.hpp"

namespace k = xrs::kernels;

namespace {

std::vector<float> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

k::Conv2dGeometry conv_shape(const benchmark::State& state) {
  k::Conv2dGeometry g;
  g.batch = 8;
  g.in_channels = static_cast<int>(state.range(0));
  g.out_channels = static_cast<int>(state.range(1));
  g.in_h = g.in_w = static_cast<int>(state.range(2));
  g.kernel = 3;
  g.stride = static_cast<int>(state.range(3));
  g.pad = 1;
  return g;
}

void conv_counters(benchmark::State& state, const k::Conv2dGeometry& g) {
  const double flops = 2.0 * static_cast<double>(g.output_size()) * g.in_channels * g.kernel * g.kernel;
  state.counters["GFLOP/s"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_shape(state);
  const auto in = random_vector(g.input_size(), 1);
  const auto w = random_vector(g.weight_size(), 2);
  std::vector<float> out(g.output_size());
  for (auto _ : state) {
    if constexpr (Reference) k::reference::conv2d_forward(g, in.data(), w.data(), static_cast<const float*>(nullptr), out.data());
    else k::omp::conv2d_forward(g, in.data(), w.data(), static_cast<const float*>(nullptr), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  conv_counters(state, g);
}

template <bool Reference>
void BM_ConvBackwardInput(benchmark::State& state) {
  const auto g = conv_shape(state);
  const auto dy = random_vector(g.output_size(), 3);
  const auto w = random_vector(g.weight_size(), 2);
  std::vector<float> dx(g.input_size());
  for (auto _ : state) {
    if constexpr (Reference) k::reference::conv2d_backward_input(g, dy.data(), w.data(), dx.data());
    else k::omp::conv2d_backward_input(g, dy.data(), w.data(), dx.data());
    benchmark::DoNotOptimize(dx.data());
  }
  conv_counters(state, g);
}

template <bool Reference>
void BM_ConvBackwardWeight(benchmark::State& state) {
  const auto g = conv_shape(state);
  const auto in = random_vector(g.input_size(), 1);
  const auto dy = random_vector(g.output_size(), 3);
  std::vector<float> dw(g.weight_size());
  for (auto _ : state) {
    if constexpr (Reference) k::reference::conv2d_backward_weight(g, in.data(), dy.data(), dw.data(), static_cast<float*>(nullptr));
    else k::omp::conv2d_backward_weight(g, in.data(), dy.data(), dw.data(), static_cast<float*>(nullptr));
    benchmark::DoNotOptimize(dw.data());
  }
  conv_counters(state, g);
}

template <bool Reference>
void BM_BatchNorm(benchmark::State& state) {
  k::BatchNormGeometry g;
  g.batch = 16;
  g.channels = static_cast<int>(state.range(0));
  g.spatial = static_cast<int>(state.range(1) * state.range(1));
  const std::size_t n = static_cast<std::size_t>(g.batch) * g.channels * g.spatial;
  const auto x = random_vector(n, 4);
  const auto dy = random_vector(n, 5);
  const std::vector<float> gamma(static_cast<std::size_t>(g.channels), 1.0f);
  const std::vector<float> beta(static_cast<std::size_t>(g.channels), 0.0f);
  std::vector<float> y(n), dx(n), mean(gamma.size()), inv_std(gamma.size()), dg(gamma.size()), db(gamma.size());
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::batch_norm_forward_train(g, x.data(), gamma.data(), beta.data(), 1e-5f, y.data(), mean.data(),
                                             inv_std.data());
      k::reference::batch_norm_backward(g, x.data(), gamma.data(), mean.data(), inv_std.data(), dy.data(), dx.data(),
                                        dg.data(), db.data());
    } else {
      k::omp::batch_norm_forward_train(g, x.data(), gamma.data(), beta.data(), 1e-5f, y.data(), mean.data(),
                                       inv_std.data());
      k::omp::batch_norm_backward(g, x.data(), gamma.data(), mean.data(), inv_std.data(), dy.data(), dx.data(),
                                  dg.data(), db.data());
    }
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(4 * n * sizeof(float)));
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_vector(static_cast<std::size_t>(n) * n, 6);
  const auto b = random_vector(static_cast<std::size_t>(n) * n, 7);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    if constexpr (Reference) k::reference::gemm(false, true, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    else k::omp::gemm(false, true, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

// in_channels, out_channels, spatial size, stride
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({3, 16, 112, 2})->Args({32, 64, 28, 2})->Args({64, 64, 56, 1})->Args({256, 256, 14, 1});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/omp")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardInput<true>)->Name("conv_backward_input/reference")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardInput<false>)->Name("conv_backward_input/omp")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardWeight<true>)->Name("conv_backward_weight/reference")->Apply(conv_args);
BENCHMARK(BM_ConvBackwardWeight<false>)->Name("conv_backward_weight/omp")->Apply(conv_args);
BENCHMARK(BM_BatchNorm<true>)->Name("batch_norm/reference")->Args({64, 56})->Args({256, 14})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BatchNorm<false>)->Name("batch_norm/omp")->Args({64, 56})->Args({256, 14})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<false>)->Name("gemm/omp")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
