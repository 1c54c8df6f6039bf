// Serial reference kernels against their OpenMP versions. The thread count
// follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gtcausin/kernels.hpp"

namespace k = gtc::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	std::vector<double> v(n);
	for (auto& x : v) {
		x = u(rng);
	}
	return v;
}

template <bool Parallel>
void gemm(benchmark::State& state) {
	const auto n = static_cast<std::size_t>(state.range(0));
	const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
	std::vector<double> c(n * n);
	for (auto _ : state) {
		if constexpr (Parallel) {
			k::parallel::gemm_nn(n, n, n, a, b, c);
		} else {
			k::serial::gemm_nn(n, n, n, a, b, c);
		}
		benchmark::DoNotOptimize(c.data());
	}
	state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

template <bool Parallel>
void conv(benchmark::State& state) {
	const k::ConvDims d{static_cast<std::size_t>(state.range(0)), 32, 32, 12, 2, 2};
	const auto x = random_vec(d.nodes * d.in_channels * d.time, 3);
	const auto th = random_vec(d.out_channels * d.in_channels * d.taps, 4);
	std::vector<double> y(d.nodes * d.out_channels * d.time);
	for (auto _ : state) {
		if constexpr (Parallel) {
			k::parallel::causal_conv(d, x, th, y);
		} else {
			k::serial::causal_conv(d, x, th, y);
		}
		benchmark::DoNotOptimize(y.data());
	}
}

template <bool Parallel>
void mix(benchmark::State& state) {
	const k::MixDims d{7, static_cast<std::size_t>(state.range(0)), 32, 32, 12};
	const auto z = random_vec(d.supports * d.nodes * d.in_channels * d.time, 5);
	const auto th = random_vec(d.out_channels * d.in_channels * d.supports, 6);
	std::vector<double> y(d.nodes * d.out_channels * d.time);
	for (auto _ : state) {
		if constexpr (Parallel) {
			k::parallel::diffusion_mix(d, z, th, y);
		} else {
			k::serial::diffusion_mix(d, z, th, y);
		}
		benchmark::DoNotOptimize(y.data());
	}
}

} // namespace

BENCHMARK(gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(conv<false>)->Arg(20)->Arg(207);
BENCHMARK(conv<true>)->Arg(20)->Arg(207);
BENCHMARK(mix<false>)->Arg(20)->Arg(207);
BENCHMARK(mix<true>)->Arg(20)->Arg(207);

BENCHMARK_MAIN();
