#include "gtcausin/tape.hpp"

#include <algorithm>
#include <cmath>

#include "gtcausin/error.hpp"
#include "gtcausin/kernels.hpp"

namespace gtc {

Var Tape::constant(Tensor value) {
	nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
	return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
	if (!value.all_finite()) {
		throw NumericError("leaf value contains non-finite entries");
	}
	nodes_.push_back(Node{std::move(value), {}, true, {}, nullptr});
	return Var{nodes_.size() - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
	auto& e = store.at(name);
	nodes_.push_back(Node{e.value, {}, true, {}, &e.grad});
	return Var{nodes_.size() - 1};
}

const Tensor& Tape::grad(Var v) const {
	const auto& n = nodes_.at(v.id);
	if (n.grad.empty() && !n.value.empty()) {
		throw InputError("no gradient recorded for this value (call backward first)");
	}
	return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
	auto& n = nodes_[id];
	if (n.grad.empty()) {
		n.grad = Tensor(n.value.shape());
	}
	return n.grad;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
	return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
	bool rg = false;
	for (auto v : inputs) {
		rg = rg || nodes_.at(v.id).requires_grad;
	}
	nodes_.push_back(Node{std::move(value), {}, rg, rg ? std::move(fn) : BackwardFn{}, nullptr});
	return Var{nodes_.size() - 1};
}

void Tape::backward(Var root) {
	require(value(root).size() == 1, "backward() without a seed needs a scalar root");
	backward(root, Tensor(value(root).shape(), 1.0));
}

void Tape::backward(Var root, const Tensor& seed) {
	require(seed.shape() == value(root).shape(), "backward seed shape mismatch");
	for (auto& n : nodes_) {
		n.grad = Tensor();
	}
	grad_buffer(root.id) = seed;
	for (std::size_t i = root.id + 1; i-- > 0;) {
		auto& n = nodes_[i];
		if (!n.requires_grad || n.grad.empty()) {
			continue;
		}
		if (n.backward) {
			n.backward(*this, i);
		}
	}
	for (auto& n : nodes_) {
		if (n.sink && !n.grad.empty()) {
			auto dst = n.sink->data();
			auto src = n.grad.data();
			for (std::size_t k = 0; k < dst.size(); ++k) {
				dst[k] += src[k];
			}
		}
	}
}

namespace ops {

namespace {

void check_rank(const Tensor& t, std::size_t r, const char* op) {
	if (t.rank() != r) {
		throw InputError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
		                 shape_string(t.shape()));
	}
}

void accumulate(Tensor& dst, const Tensor& src, double s = 1.0) {
	auto d = dst.data();
	auto v = src.data();
	for (std::size_t i = 0; i < d.size(); ++i) {
		d[i] += s * v[i];
	}
}

} // namespace

Var matmul(Tape& t, Var a, Var b) {
	const Tensor& A = t.value(a);
	const Tensor& B = t.value(b);
	check_rank(A, 2, "matmul");
	check_rank(B, 2, "matmul");
	if (A.dim(1) != B.dim(0)) {
		throw InputError("matmul: shape mismatch " + shape_string(A.shape()) + " * " + shape_string(B.shape()));
	}
	const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
	Tensor C({m, n});
	kernels::gemm_nn(m, k, n, A.data(), B.data(), C.data());
	return t.record(std::move(C), {a, b}, [a, b, m, k, n](Tape& tp, std::size_t self) {
		const Tensor& G = tp.grad_at(self);
		if (tp.needs_grad_at(a.id)) {
			// dA = G B^T
			kernels::gemm_nt(m, n, k, G.data(), tp.value_at(b.id).data(), tp.grad_buffer(a.id).data());
		}
		if (tp.needs_grad_at(b.id)) {
			// dB = A^T G
			kernels::gemm_tn(k, m, n, tp.value_at(a.id).data(), G.data(), tp.grad_buffer(b.id).data());
		}
	});
}

Var add(Tape& t, Var a, Var b) {
	const Tensor& A = t.value(a);
	const Tensor& B = t.value(b);
	if (A.shape() != B.shape()) {
		throw InputError("add: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
	}
	Tensor C = A;
	accumulate(C, B);
	return t.record(std::move(C), {a, b}, [a, b](Tape& tp, std::size_t self) {
		for (auto v : {a, b}) {
			if (tp.needs_grad_at(v.id)) {
				accumulate(tp.grad_buffer(v.id), tp.grad_at(self));
			}
		}
	});
}

Var sub(Tape& t, Var a, Var b) {
	const Tensor& A = t.value(a);
	const Tensor& B = t.value(b);
	if (A.shape() != B.shape()) {
		throw InputError("sub: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
	}
	Tensor C = A;
	accumulate(C, B, -1.0);
	return t.record(std::move(C), {a, b}, [a, b](Tape& tp, std::size_t self) {
		if (tp.needs_grad_at(a.id)) {
			accumulate(tp.grad_buffer(a.id), tp.grad_at(self));
		}
		if (tp.needs_grad_at(b.id)) {
			accumulate(tp.grad_buffer(b.id), tp.grad_at(self), -1.0);
		}
	});
}

Var scale(Tape& t, Var a, double s) {
	return affine(t, a, s, 0.0);
}

Var affine(Tape& t, Var a, double mul, double shift) {
	Tensor C = t.value(a);
	for (auto& v : C.data()) {
		v = v * mul + shift;
	}
	return t.record(std::move(C), {a}, [a, mul](Tape& tp, std::size_t self) {
		accumulate(tp.grad_buffer(a.id), tp.grad_at(self), mul);
	});
}

Var relu(Tape& t, Var a) {
	Tensor C = t.value(a);
	double margin = std::numeric_limits<double>::infinity();
	for (auto& v : C.data()) {
		margin = std::min(margin, std::abs(v));
		t.note_kink_side(v > 0.0);
		v = v > 0.0 ? v : 0.0;
	}
	t.note_kink_distance(margin);
	return t.record(std::move(C), {a}, [a](Tape& tp, std::size_t self) {
		const auto x = tp.value_at(a.id).data();
		const auto g = tp.grad_at(self).data();
		auto d = tp.grad_buffer(a.id).data();
		for (std::size_t i = 0; i < d.size(); ++i) {
			if (x[i] > 0.0) {
				d[i] += g[i];
			}
		}
	});
}

Var softmax_rows(Tape& t, Var a) {
	const Tensor& A = t.value(a);
	check_rank(A, 2, "softmax_rows");
	const std::size_t m = A.dim(0), n = A.dim(1);
	Tensor Y({m, n});
	for (std::size_t i = 0; i < m; ++i) {
		double mx = -std::numeric_limits<double>::infinity();
		for (std::size_t j = 0; j < n; ++j) {
			mx = std::max(mx, A(i, j));
		}
		double z = 0.0;
		for (std::size_t j = 0; j < n; ++j) {
			Y(i, j) = std::exp(A(i, j) - mx);
			z += Y(i, j);
		}
		for (std::size_t j = 0; j < n; ++j) {
			Y(i, j) /= z;
		}
	}
	return t.record(std::move(Y), {a}, [a, m, n](Tape& tp, std::size_t self) {
		const Tensor& Yv = tp.value_at(self);
		const Tensor& G = tp.grad_at(self);
		Tensor& D = tp.grad_buffer(a.id);
		for (std::size_t i = 0; i < m; ++i) {
			double dot = 0.0;
			for (std::size_t j = 0; j < n; ++j) {
				dot += G(i, j) * Yv(i, j);
			}
			for (std::size_t j = 0; j < n; ++j) {
				D(i, j) += Yv(i, j) * (G(i, j) - dot);
			}
		}
	});
}

Var transpose(Tape& t, Var a) {
	check_rank(t.value(a), 2, "transpose");
	return t.record(t.value(a).transposed(), {a}, [a](Tape& tp, std::size_t self) {
		accumulate(tp.grad_buffer(a.id), tp.grad_at(self).transposed());
	});
}

Var reshape(Tape& t, Var a, Shape shape) {
	return t.record(t.value(a).reshaped(std::move(shape)), {a}, [a](Tape& tp, std::size_t self) {
		auto d = tp.grad_buffer(a.id).data();
		const auto g = tp.grad_at(self).data();
		for (std::size_t i = 0; i < d.size(); ++i) {
			d[i] += g[i];
		}
	});
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
	require(!parts.empty(), "concat_rows: no inputs");
	const std::size_t cols = t.value(parts[0]).rank() == 2 ? t.value(parts[0]).dim(1) : 0;
	std::size_t rows = 0;
	for (auto p : parts) {
		check_rank(t.value(p), 2, "concat_rows");
		require(t.value(p).dim(1) == cols, "concat_rows: column count mismatch");
		rows += t.value(p).dim(0);
	}
	std::vector<double> data;
	data.reserve(rows * cols);
	for (auto p : parts) {
		data.insert(data.end(), t.value(p).data().begin(), t.value(p).data().end());
	}
	Tensor C({rows, cols});
	C.storage() = std::move(data);
	return t.record(std::move(C), parts, [parts](Tape& tp, std::size_t self) {
		const auto g = tp.grad_at(self).data();
		std::size_t off = 0;
		for (auto p : parts) {
			const std::size_t len = tp.value_at(p.id).size();
			if (tp.needs_grad_at(p.id)) {
				auto d = tp.grad_buffer(p.id).data();
				for (std::size_t i = 0; i < len; ++i) {
					d[i] += g[off + i];
				}
			}
			off += len;
		}
	});
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
	require(!parts.empty(), "concat_cols: no inputs");
	check_rank(t.value(parts[0]), 2, "concat_cols");
	const std::size_t rows = t.value(parts[0]).dim(0);
	std::size_t cols = 0;
	for (auto p : parts) {
		check_rank(t.value(p), 2, "concat_cols");
		require(t.value(p).dim(0) == rows, "concat_cols: row count mismatch");
		cols += t.value(p).dim(1);
	}
	Tensor C({rows, cols});
	std::size_t off = 0;
	for (auto p : parts) {
		const Tensor& P = t.value(p);
		for (std::size_t i = 0; i < rows; ++i) {
			for (std::size_t j = 0; j < P.dim(1); ++j) {
				C(i, off + j) = P(i, j);
			}
		}
		off += P.dim(1);
	}
	return t.record(std::move(C), parts, [parts, rows](Tape& tp, std::size_t self) {
		const Tensor& G = tp.grad_at(self);
		std::size_t off = 0;
		for (auto p : parts) {
			const std::size_t w = tp.value_at(p.id).dim(1);
			if (tp.needs_grad_at(p.id)) {
				Tensor& D = tp.grad_buffer(p.id);
				for (std::size_t i = 0; i < rows; ++i) {
					for (std::size_t j = 0; j < w; ++j) {
						D(i, j) += G(i, off + j);
					}
				}
			}
			off += w;
		}
	});
}

Var slice_rows(Tape& t, Var a, std::size_t begin, std::size_t count) {
	const Tensor& A = t.value(a);
	check_rank(A, 2, "slice_rows");
	require(begin + count <= A.dim(0), "slice_rows: range out of bounds");
	const std::size_t cols = A.dim(1);
	std::vector<double> data(A.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
	                         A.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * cols));
	Tensor C({count, cols});
	C.storage() = std::move(data);
	return t.record(std::move(C), {a}, [a, begin, cols](Tape& tp, std::size_t self) {
		const auto g = tp.grad_at(self).data();
		auto d = tp.grad_buffer(a.id).data();
		for (std::size_t i = 0; i < g.size(); ++i) {
			d[begin * cols + i] += g[i];
		}
	});
}

Var concat_channels(Tape& t, const std::vector<Var>& parts) {
	require(!parts.empty(), "concat_channels: no inputs");
	check_rank(t.value(parts[0]), 3, "concat_channels");
	const std::size_t N = t.value(parts[0]).dim(0);
	const std::size_t T = t.value(parts[0]).dim(2);
	std::size_t C = 0;
	for (auto p : parts) {
		const Tensor& P = t.value(p);
		check_rank(P, 3, "concat_channels");
		if (P.dim(0) != N || P.dim(2) != T) {
			throw InputError("concat_channels: node or time dimension mismatch");
		}
		C += P.dim(1);
	}
	Tensor out({N, C, T});
	std::size_t off = 0;
	for (auto p : parts) {
		const Tensor& P = t.value(p);
		const std::size_t c = P.dim(1);
		for (std::size_t n = 0; n < N; ++n) {
			std::copy_n(P.data().begin() + static_cast<std::ptrdiff_t>(n * c * T), c * T,
			            out.data().begin() + static_cast<std::ptrdiff_t>((n * C + off) * T));
		}
		off += c;
	}
	return t.record(std::move(out), parts, [parts, N, C, T](Tape& tp, std::size_t self) {
		const auto g = tp.grad_at(self).data();
		std::size_t off = 0;
		for (auto p : parts) {
			const std::size_t c = tp.value_at(p.id).dim(1);
			if (tp.needs_grad_at(p.id)) {
				auto d = tp.grad_buffer(p.id).data();
				for (std::size_t n = 0; n < N; ++n) {
					for (std::size_t i = 0; i < c * T; ++i) {
						d[n * c * T + i] += g[(n * C + off) * T + i];
					}
				}
			}
			off += c;
		}
	});
}

Var channels_to_rows(Tape& t, Var a) {
	const Tensor& A = t.value(a);
	check_rank(A, 3, "channels_to_rows");
	const std::size_t N = A.dim(0), C = A.dim(1), T = A.dim(2);
	Tensor out({N * T, C});
	for (std::size_t n = 0; n < N; ++n) {
		for (std::size_t c = 0; c < C; ++c) {
			for (std::size_t s = 0; s < T; ++s) {
				out(n * T + s, c) = A(n, c, s);
			}
		}
	}
	return t.record(std::move(out), {a}, [a, N, C, T](Tape& tp, std::size_t self) {
		const Tensor& G = tp.grad_at(self);
		Tensor& D = tp.grad_buffer(a.id);
		for (std::size_t n = 0; n < N; ++n) {
			for (std::size_t c = 0; c < C; ++c) {
				for (std::size_t s = 0; s < T; ++s) {
					D(n, c, s) += G(n * T + s, c);
				}
			}
		}
	});
}

Var rows_to_channels(Tape& t, Var a, std::size_t nodes, std::size_t time) {
	const Tensor& A = t.value(a);
	check_rank(A, 2, "rows_to_channels");
	require(A.dim(0) == nodes * time, "rows_to_channels: row count must equal nodes * time");
	const std::size_t C = A.dim(1);
	Tensor out({nodes, C, time});
	for (std::size_t n = 0; n < nodes; ++n) {
		for (std::size_t c = 0; c < C; ++c) {
			for (std::size_t s = 0; s < time; ++s) {
				out(n, c, s) = A(n * time + s, c);
			}
		}
	}
	return t.record(std::move(out), {a}, [a, nodes, C, time](Tape& tp, std::size_t self) {
		const Tensor& G = tp.grad_at(self);
		Tensor& D = tp.grad_buffer(a.id);
		for (std::size_t n = 0; n < nodes; ++n) {
			for (std::size_t c = 0; c < C; ++c) {
				for (std::size_t s = 0; s < time; ++s) {
					D(n * time + s, c) += G(n, c, s);
				}
			}
		}
	});
}

Var add_row_bias(Tape& t, Var a, Var bias) {
	const Tensor& A = t.value(a);
	const Tensor& B = t.value(bias);
	check_rank(A, 2, "add_row_bias");
	check_rank(B, 2, "add_row_bias");
	require(B.dim(0) == 1 && B.dim(1) == A.dim(1), "add_row_bias: bias must be [1 x cols]");
	const std::size_t m = A.dim(0), n = A.dim(1);
	Tensor C = A;
	for (std::size_t i = 0; i < m; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			C(i, j) += B(0, j);
		}
	}
	return t.record(std::move(C), {a, bias}, [a, bias, m, n](Tape& tp, std::size_t self) {
		const Tensor& G = tp.grad_at(self);
		if (tp.needs_grad_at(a.id)) {
			accumulate(tp.grad_buffer(a.id), G);
		}
		if (tp.needs_grad_at(bias.id)) {
			Tensor& D = tp.grad_buffer(bias.id);
			for (std::size_t i = 0; i < m; ++i) {
				for (std::size_t j = 0; j < n; ++j) {
					D(0, j) += G(i, j);
				}
			}
		}
	});
}

Var repeat_rows(Tape& t, Var a, std::size_t m) {
	const Tensor& A = t.value(a);
	check_rank(A, 2, "repeat_rows");
	require(A.dim(0) == 1, "repeat_rows: input must have one row");
	const std::size_t n = A.dim(1);
	Tensor C({m, n});
	for (std::size_t i = 0; i < m; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			C(i, j) = A(0, j);
		}
	}
	return t.record(std::move(C), {a}, [a, m, n](Tape& tp, std::size_t self) {
		const Tensor& G = tp.grad_at(self);
		Tensor& D = tp.grad_buffer(a.id);
		for (std::size_t i = 0; i < m; ++i) {
			for (std::size_t j = 0; j < n; ++j) {
				D(0, j) += G(i, j);
			}
		}
	});
}

Var causal_conv(Tape& t, Var x, Var theta, std::size_t dilation) {
	const Tensor& X = t.value(x);
	const Tensor& W = t.value(theta);
	check_rank(X, 3, "causal_conv");
	check_rank(W, 3, "causal_conv");
	require(dilation >= 1, "causal_conv: dilation must be >= 1");
	require(W.dim(1) == X.dim(1), "causal_conv: theta input channels " + std::to_string(W.dim(1)) +
	                                  " != signal channels " + std::to_string(X.dim(1)));
	const kernels::ConvDims d{X.dim(0), X.dim(1), W.dim(0), X.dim(2), W.dim(2), dilation};
	Tensor Y({d.nodes, d.out_channels, d.time});
	kernels::causal_conv(d, X.data(), W.data(), Y.data());
	return t.record(std::move(Y), {x, theta}, [x, theta, d](Tape& tp, std::size_t self) {
		const auto G = tp.grad_at(self).data();
		if (tp.needs_grad_at(x.id)) {
			kernels::causal_conv_grad_input(d, G, tp.value_at(theta.id).data(), tp.grad_buffer(x.id).data());
		}
		if (tp.needs_grad_at(theta.id)) {
			kernels::causal_conv_grad_theta(d, G, tp.value_at(x.id).data(), tp.grad_buffer(theta.id).data());
		}
	});
}

namespace {

bool is_identity(const Tensor& m) {
	const std::size_t n = m.dim(0);
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			if (m(i, j) != (i == j ? 1.0 : 0.0)) {
				return false;
			}
		}
	}
	return true;
}

} // namespace

Var diffusion(Tape& t, Var x, Var theta, const std::vector<Tensor>& supports) {
	const Tensor& X = t.value(x);
	const Tensor& W = t.value(theta);
	check_rank(X, 3, "diffusion");
	check_rank(W, 4, "diffusion");
	const std::size_t N = X.dim(0), P = X.dim(1), T = X.dim(2);
	const std::size_t Q = W.dim(0), K = W.dim(2);
	require(W.dim(1) == P, "diffusion: theta input features " + std::to_string(W.dim(1)) + " != signal features " +
	                           std::to_string(P));
	require(W.dim(3) == 2, "diffusion: theta last axis must be 2 (forward, reverse)");
	require(supports.size() == 2 * K, "diffusion: need 2K transition powers");
	std::vector<bool> identity(supports.size());
	for (std::size_t s = 0; s < supports.size(); ++s) {
		require(supports[s].rank() == 2 && supports[s].dim(0) == N && supports[s].dim(1) == N,
		        "diffusion: transition power shape mismatch");
		identity[s] = is_identity(supports[s]);
	}
	const std::size_t S = 2 * K, slab = N * P * T;
	Tensor Z({S, N, P, T});
	for (std::size_t s = 0; s < S; ++s) {
		auto zs = Z.data().subspan(s * slab, slab);
		if (identity[s]) {
			std::copy(X.data().begin(), X.data().end(), zs.begin());
		} else {
			kernels::gemm_nn(N, N, P * T, supports[s].data(), X.data(), zs);
		}
	}
	const kernels::MixDims d{S, N, P, Q, T};
	Tensor Y({N, Q, T});
	kernels::diffusion_mix(d, Z.data(), W.data(), Y.data());
	const std::vector<Tensor>* sup = &supports;
	return t.record(std::move(Y), {x, theta},
	                [x, theta, d, sup, identity, z = std::move(Z)](Tape& tp, std::size_t self) {
		                const auto G = tp.grad_at(self).data();
		                if (tp.needs_grad_at(theta.id)) {
			                kernels::diffusion_mix_grad_theta(d, G, z.data(), tp.grad_buffer(theta.id).data());
		                }
		                if (tp.needs_grad_at(x.id)) {
			                const std::size_t slab = d.nodes * d.in_channels * d.time;
			                std::vector<double> dz(d.supports * slab, 0.0);
			                kernels::diffusion_mix_grad_z(d, G, tp.value_at(theta.id).data(), dz);
			                auto dx = tp.grad_buffer(x.id).data();
			                for (std::size_t s = 0; s < d.supports; ++s) {
				                std::span<const double> dzs(dz.data() + s * slab, slab);
				                if (identity[s]) {
					                for (std::size_t i = 0; i < slab; ++i) {
						                dx[i] += dzs[i];
					                }
				                } else {
					                kernels::gemm_tn(d.nodes, d.nodes, d.in_channels * d.time, (*sup)[s].data(), dzs,
					                                 dx);
				                }
			                }
		                }
	                });
}

Var masked_abs_sum(Tape& t, Var pred, const Tensor& target, const Tensor& mask) {
	const Tensor& P = t.value(pred);
	require(P.shape() == target.shape() && P.shape() == mask.shape(), "masked_abs_sum: shape mismatch");
	double s = 0.0;
	Tensor sign(P.shape());
	for (std::size_t i = 0; i < P.size(); ++i) {
		if (mask[i] != 0.0) {
			const double e = P[i] - target[i];
			s += std::abs(e);
			sign[i] = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
		}
	}
	return t.record(Tensor({1}, s), {pred}, [pred, sign = std::move(sign)](Tape& tp, std::size_t self) {
		accumulate(tp.grad_buffer(pred.id), sign, tp.grad_at(self)[0]);
	});
}

Var dot_const(Tape& t, Var a, const Tensor& w) {
	const Tensor& A = t.value(a);
	require(A.size() == w.size(), "dot_const: size mismatch");
	double s = 0.0;
	for (std::size_t i = 0; i < A.size(); ++i) {
		s += A[i] * w[i];
	}
	return t.record(Tensor({1}, s), {a}, [a, w](Tape& tp, std::size_t self) {
		auto d = tp.grad_buffer(a.id).data();
		const double g = tp.grad_at(self)[0];
		for (std::size_t i = 0; i < d.size(); ++i) {
			d[i] += g * w[i];
		}
	});
}

} // namespace ops
} // namespace gtc
