#include <benchmark/benchmark.h>

#include <vector>

#include "fnh/kernels.hpp"
#include "fnh/parallel.hpp"
#include "fnh/rng.hpp"

using namespace fnh;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t stream) {
  Rng rng = substream(2024, stream);
  std::vector<double> v(n);
  for (double& x : v) x = uniform01(rng);
  return v;
}

kernels::ConvShape conv_shape(const benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  return {8, 8, size, size, 3};
}

// range(0): spatial size, range(1): thread count (omp only).
template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto in = random_vector(s.in_size(), 0);
  const auto w = random_vector(s.weight_count(), 1);
  const std::vector<double> b(s.out_channels, 0.1);
  std::vector<double> out(s.out_size());
  if (Parallel) set_thread_count(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if (Parallel) {
      kernels::omp::conv2d_forward(s, in, w, b, out);
    } else {
      kernels::serial::conv2d_forward(s, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  set_thread_count(0);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.out_size()));
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto in = random_vector(s.in_size(), 0);
  const auto w = random_vector(s.weight_count(), 1);
  const auto g = random_vector(s.out_size(), 2);
  std::vector<double> gin(s.in_size()), gw(s.weight_count()), gb(s.out_channels);
  if (Parallel) set_thread_count(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if (Parallel) {
      kernels::omp::conv2d_backward_input(s, g, w, gin);
      kernels::omp::conv2d_backward_weight(s, g, in, gw, gb);
    } else {
      kernels::serial::conv2d_backward_input(s, g, w, gin);
      kernels::serial::conv2d_backward_weight(s, g, in, gw, gb);
    }
    benchmark::DoNotOptimize(gin.data());
    benchmark::DoNotOptimize(gw.data());
  }
  set_thread_count(0);
}

template <bool Parallel>
void BM_Synthesize(benchmark::State& state) {
  const std::size_t px = static_cast<std::size_t>(state.range(0)) * state.range(0);
  const auto clean = random_vector(3 * px, 0);
  const auto alf = random_vector(3 * px, 1);
  const auto beta = random_vector(px, 2);
  const auto depth = random_vector(px, 3);
  std::vector<double> hazy(3 * px);
  if (Parallel) set_thread_count(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if (Parallel) {
      kernels::omp::synthesize(clean, alf, beta, depth, 3, hazy);
    } else {
      kernels::serial::synthesize(clean, alf, beta, depth, 3, hazy);
    }
    benchmark::DoNotOptimize(hazy.data());
  }
  set_thread_count(0);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(px));
}

void omp_args(benchmark::internal::Benchmark* b) {
  for (int size : {64, 256}) {
    for (int threads : {1, 2, 4}) b->Args({size, threads});
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/omp")->Apply(omp_args)->UseRealTime();
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/omp")->Apply(omp_args)->UseRealTime();
BENCHMARK(BM_Synthesize<false>)->Name("synthesize/serial")->Arg(256)->Arg(1024)->UseRealTime();
BENCHMARK(BM_Synthesize<true>)
    ->Name("synthesize/omp")
    ->Args({256, 1})
    ->Args({256, 2})
    ->Args({1024, 1})
    ->Args({1024, 2})
    ->UseRealTime();

BENCHMARK_MAIN();
