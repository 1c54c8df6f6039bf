#include "gtcausin/kernels.hpp"

namespace gtc::kernels::serial {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
	for (std::size_t i = 0; i < m; ++i) {
		double* ci = c.data() + i * n;
		for (std::size_t p = 0; p < k; ++p) {
			const double aip = a[i * k + p];
			const double* bp = b.data() + p * n;
			for (std::size_t j = 0; j < n; ++j) {
				ci[j] += aip * bp[j];
			}
		}
	}
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
	for (std::size_t i = 0; i < m; ++i) {
		double* ci = c.data() + i * n;
		for (std::size_t p = 0; p < k; ++p) {
			const double api = a[p * m + i];
			const double* bp = b.data() + p * n;
			for (std::size_t j = 0; j < n; ++j) {
				ci[j] += api * bp[j];
			}
		}
	}
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
	for (std::size_t i = 0; i < m; ++i) {
		const double* ai = a.data() + i * k;
		for (std::size_t j = 0; j < n; ++j) {
			const double* bj = b.data() + j * k;
			double s = 0.0;
			for (std::size_t p = 0; p < k; ++p) {
				s += ai[p] * bj[p];
			}
			c[i * n + j] += s;
		}
	}
}

void causal_conv(const ConvDims& d, std::span<const double> x, std::span<const double> theta, std::span<double> y) {
	const std::size_t T = d.time;
	for (std::size_t n = 0; n < d.nodes; ++n) {
		for (std::size_t q = 0; q < d.out_channels; ++q) {
			double* yq = y.data() + (n * d.out_channels + q) * T;
			for (std::size_t p = 0; p < d.in_channels; ++p) {
				const double* xp = x.data() + (n * d.in_channels + p) * T;
				for (std::size_t k = 0; k < d.taps; ++k) {
					const double w = theta[(q * d.in_channels + p) * d.taps + k];
					const std::size_t shift = d.dilation * k;
					for (std::size_t t = shift; t < T; ++t) {
						yq[t] += w * xp[t - shift];
					}
				}
			}
		}
	}
}

void causal_conv_grad_input(const ConvDims& d, std::span<const double> dy, std::span<const double> theta,
                            std::span<double> dx) {
	const std::size_t T = d.time;
	for (std::size_t n = 0; n < d.nodes; ++n) {
		for (std::size_t q = 0; q < d.out_channels; ++q) {
			const double* dyq = dy.data() + (n * d.out_channels + q) * T;
			for (std::size_t p = 0; p < d.in_channels; ++p) {
				double* dxp = dx.data() + (n * d.in_channels + p) * T;
				for (std::size_t k = 0; k < d.taps; ++k) {
					const double w = theta[(q * d.in_channels + p) * d.taps + k];
					const std::size_t shift = d.dilation * k;
					for (std::size_t t = shift; t < T; ++t) {
						dxp[t - shift] += w * dyq[t];
					}
				}
			}
		}
	}
}

void causal_conv_grad_theta(const ConvDims& d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dtheta) {
	const std::size_t T = d.time;
	for (std::size_t q = 0; q < d.out_channels; ++q) {
		for (std::size_t p = 0; p < d.in_channels; ++p) {
			for (std::size_t k = 0; k < d.taps; ++k) {
				const std::size_t shift = d.dilation * k;
				double s = 0.0;
				for (std::size_t n = 0; n < d.nodes; ++n) {
					const double* dyq = dy.data() + (n * d.out_channels + q) * T;
					const double* xp = x.data() + (n * d.in_channels + p) * T;
					for (std::size_t t = shift; t < T; ++t) {
						s += dyq[t] * xp[t - shift];
					}
				}
				dtheta[(q * d.in_channels + p) * d.taps + k] += s;
			}
		}
	}
}

void diffusion_mix(const MixDims& d, std::span<const double> z, std::span<const double> theta, std::span<double> y) {
	const std::size_t T = d.time;
	const std::size_t slab = d.nodes * d.in_channels * T;
	for (std::size_t n = 0; n < d.nodes; ++n) {
		for (std::size_t q = 0; q < d.out_channels; ++q) {
			double* yq = y.data() + (n * d.out_channels + q) * T;
			for (std::size_t p = 0; p < d.in_channels; ++p) {
				for (std::size_t s = 0; s < d.supports; ++s) {
					const double w = theta[(q * d.in_channels + p) * d.supports + s];
					const double* zp = z.data() + s * slab + (n * d.in_channels + p) * T;
					for (std::size_t t = 0; t < T; ++t) {
						yq[t] += w * zp[t];
					}
				}
			}
		}
	}
}

void diffusion_mix_grad_z(const MixDims& d, std::span<const double> dy, std::span<const double> theta,
                          std::span<double> dz) {
	const std::size_t T = d.time;
	const std::size_t slab = d.nodes * d.in_channels * T;
	for (std::size_t n = 0; n < d.nodes; ++n) {
		for (std::size_t q = 0; q < d.out_channels; ++q) {
			const double* dyq = dy.data() + (n * d.out_channels + q) * T;
			for (std::size_t p = 0; p < d.in_channels; ++p) {
				for (std::size_t s = 0; s < d.supports; ++s) {
					const double w = theta[(q * d.in_channels + p) * d.supports + s];
					double* dzp = dz.data() + s * slab + (n * d.in_channels + p) * T;
					for (std::size_t t = 0; t < T; ++t) {
						dzp[t] += w * dyq[t];
					}
				}
			}
		}
	}
}

void diffusion_mix_grad_theta(const MixDims& d, std::span<const double> dy, std::span<const double> z,
                              std::span<double> dtheta) {
	const std::size_t T = d.time;
	const std::size_t slab = d.nodes * d.in_channels * T;
	for (std::size_t q = 0; q < d.out_channels; ++q) {
		for (std::size_t p = 0; p < d.in_channels; ++p) {
			for (std::size_t s = 0; s < d.supports; ++s) {
				double acc = 0.0;
				for (std::size_t n = 0; n < d.nodes; ++n) {
					const double* dyq = dy.data() + (n * d.out_channels + q) * T;
					const double* zp = z.data() + s * slab + (n * d.in_channels + p) * T;
					for (std::size_t t = 0; t < T; ++t) {
						acc += dyq[t] * zp[t];
					}
				}
				dtheta[(q * d.in_channels + p) * d.supports + s] += acc;
			}
		}
	}
}

} // namespace gtc::kernels::serial
