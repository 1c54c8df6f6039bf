#pragma once

#include <cstdint>
#include <functional>

#include "gtcausin/params.hpp"
#include "gtcausin/tape.hpp"

namespace gtc {

struct GradCheckOptions {
	// Check at most this many coordinates, sampled without replacement
	// (0 = every coordinate).
	std::size_t max_coords = 0;
	std::uint64_t seed = 0;
	// Denominator floor of the relative error |a - n| / max(|a| + |n|, floor).
	double floor = 1e-6;
	// Skip coordinates whose +/- epsilon probes flip any rectifier, since the
	// function is not smooth across that stencil.
	bool skip_kink_crossings = true;
};

struct GradCheckResult {
	double max_rel_error = 0.0;
	std::size_t coords_checked = 0;
	std::size_t coords_skipped = 0;
	// Smallest rectifier pre-activation magnitude seen at the base point.
	double min_kink_distance = 0.0;
};

using ScalarFn = std::function<Var(Tape&, Var)>;
using ParamScalarFn = std::function<Var(Tape&)>;

// Compares the reverse-mode gradient of f at `point` against central
// differences (f(x + eps) - f(x - eps)) / (2 eps). Throws NumericError when f
// produces a non-finite value.
GradCheckResult grad_check_detailed(const ScalarFn& f, const Tensor& point, double epsilon,
                                    const GradCheckOptions& opts = {});
double grad_check(const ScalarFn& f, const Tensor& point, double epsilon, const GradCheckOptions& opts = {});

// Same check over every parameter of `store`; f binds parameters with
// Tape::param. Store values are restored on return.
GradCheckResult grad_check_params(ParamStore& store, const ParamScalarFn& f, double epsilon,
                                  const GradCheckOptions& opts = {});

} // namespace gtc
