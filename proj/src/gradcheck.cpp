#include "gtcausin/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gtcausin/error.hpp"

namespace gtc {

namespace {

std::vector<std::size_t> pick_coords(std::size_t n, const GradCheckOptions& opts) {
	std::vector<std::size_t> idx(n);
	std::iota(idx.begin(), idx.end(), std::size_t{0});
	if (opts.max_coords == 0 || opts.max_coords >= n) {
		return idx;
	}
	std::mt19937_64 rng(opts.seed);
	std::shuffle(idx.begin(), idx.end(), rng);
	idx.resize(opts.max_coords);
	std::sort(idx.begin(), idx.end());
	return idx;
}

double scalar_of(const Tape& tape, Var out) {
	const Tensor& v = tape.value(out);
	if (v.size() != 1) {
		throw InputError("grad_check: function must return a scalar");
	}
	if (!std::isfinite(v[0])) {
		throw NumericError("grad_check: function returned a non-finite value");
	}
	return v[0];
}

void check_epsilon(double eps) {
	require(eps >= 1e-7 && eps <= 1e-3, "grad_check: epsilon must lie in [1e-7, 1e-3]");
}

double rel_error(double a, double n, double floor) {
	return std::abs(a - n) / std::max(std::abs(a) + std::abs(n), floor);
}

} // namespace

GradCheckResult grad_check_detailed(const ScalarFn& f, const Tensor& point, double epsilon,
                                    const GradCheckOptions& opts) {
	check_epsilon(epsilon);
	GradCheckResult res;
	Tensor analytic;
	std::uint64_t pattern = 0;
	{
		Tape tape;
		Var x = tape.leaf(point);
		Var out = f(tape, x);
		scalar_of(tape, out);
		tape.backward(out);
		analytic = tape.grad(x);
		res.min_kink_distance = tape.min_kink_distance();
		pattern = tape.kink_pattern();
	}
	bool crossed = false;
	auto eval = [&](const Tensor& p) {
		Tape tape;
		Var x = tape.leaf(p);
		const double v = scalar_of(tape, f(tape, x));
		crossed = crossed || tape.kink_pattern() != pattern;
		return v;
	};
	Tensor probe = point;
	for (std::size_t i : pick_coords(point.size(), opts)) {
		const double orig = probe[i];
		crossed = false;
		probe[i] = orig + epsilon;
		const double fp = eval(probe);
		probe[i] = orig - epsilon;
		const double fm = eval(probe);
		probe[i] = orig;
		if (crossed && opts.skip_kink_crossings) {
			++res.coords_skipped;
			continue;
		}
		const double numeric = (fp - fm) / (2.0 * epsilon);
		res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic[i], numeric, opts.floor));
		++res.coords_checked;
	}
	return res;
}

double grad_check(const ScalarFn& f, const Tensor& point, double epsilon, const GradCheckOptions& opts) {
	return grad_check_detailed(f, point, epsilon, opts).max_rel_error;
}

GradCheckResult grad_check_params(ParamStore& store, const ParamScalarFn& f, double epsilon,
                                  const GradCheckOptions& opts) {
	check_epsilon(epsilon);
	GradCheckResult res;
	std::uint64_t pattern = 0;
	bool crossed = false;
	store.zero_grads();
	{
		Tape tape;
		Var out = f(tape);
		scalar_of(tape, out);
		tape.backward(out);
		res.min_kink_distance = tape.min_kink_distance();
		pattern = tape.kink_pattern();
	}
	const std::vector<double> analytic = store.flat_grads();
	const std::vector<double> base = store.flat_values();
	std::vector<double> probe = base;
	auto eval = [&]() {
		store.set_flat_values(probe);
		Tape tape;
		const double v = scalar_of(tape, f(tape));
		crossed = crossed || tape.kink_pattern() != pattern;
		return v;
	};
	for (std::size_t i : pick_coords(base.size(), opts)) {
		crossed = false;
		probe[i] = base[i] + epsilon;
		const double fp = eval();
		probe[i] = base[i] - epsilon;
		const double fm = eval();
		probe[i] = base[i];
		if (crossed && opts.skip_kink_crossings) {
			++res.coords_skipped;
			continue;
		}
		const double numeric = (fp - fm) / (2.0 * epsilon);
		res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic[i], numeric, opts.floor));
		++res.coords_checked;
	}
	store.set_flat_values(base);
	store.zero_grads();
	return res;
}

} // namespace gtc
