#pragma once

// Dense inner loops used by the differentiable ops and the correlation
// pipeline. Every kernel has a plain serial reference and an OpenMP
// version. Both accumulate each output element in the same order, so their
// results are bit-identical regardless of thread count.
//
// Layout conventions (all row-major):
//   gemm_nn: c[m x n] += a[m x k] * b[k x n]
//   gemm_tn: c[m x n] += a[k x m]^T * b[k x n]
//   gemm_nt: c[m x n] += a[m x k] * b[n x k]^T
//   causal conv: x[nodes x in x time], theta[out x in x taps], y[nodes x out x time]
//   diffusion mix: z[supports x nodes x in x time], theta[out x in x supports]

#include <cstddef>
#include <span>

namespace gtc::kernels {

struct ConvDims {
	std::size_t nodes;
	std::size_t in_channels;
	std::size_t out_channels;
	std::size_t time;
	std::size_t taps;
	std::size_t dilation;
};

struct MixDims {
	std::size_t supports;
	std::size_t nodes;
	std::size_t in_channels;
	std::size_t out_channels;
	std::size_t time;
};

#define GTC_KERNEL_DECLS                                                                                   \
	void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,                  \
	             std::span<const double> b, std::span<double> c);                                         \
	void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,                  \
	             std::span<const double> b, std::span<double> c);                                         \
	void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,                  \
	             std::span<const double> b, std::span<double> c);                                         \
	void causal_conv(const ConvDims& d, std::span<const double> x, std::span<const double> theta,         \
	                 std::span<double> y);                                                                \
	void causal_conv_grad_input(const ConvDims& d, std::span<const double> dy,                            \
	                            std::span<const double> theta, std::span<double> dx);                    \
	void causal_conv_grad_theta(const ConvDims& d, std::span<const double> dy, std::span<const double> x, \
	                            std::span<double> dtheta);                                                \
	void diffusion_mix(const MixDims& d, std::span<const double> z, std::span<const double> theta,        \
	                   std::span<double> y);                                                              \
	void diffusion_mix_grad_z(const MixDims& d, std::span<const double> dy, std::span<const double> theta, \
	                          std::span<double> dz);                                                      \
	void diffusion_mix_grad_theta(const MixDims& d, std::span<const double> dy, std::span<const double> z, \
	                              std::span<double> dtheta);

namespace serial {
GTC_KERNEL_DECLS
}

namespace parallel {
GTC_KERNEL_DECLS
}

#undef GTC_KERNEL_DECLS

// The library dispatches to the OpenMP versions.
using namespace parallel;

} // namespace gtc::kernels
