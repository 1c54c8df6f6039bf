#pragma once

// Randomised gradient and causality probes shared by the unit tests and the
// acceptance runner.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gtcausin/gradcheck.hpp"
#include "gtcausin/layers.hpp"
#include "gtcausin/model.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

namespace probes {

using namespace gtc;

struct GradCase {
	std::string name;
	// One seeded random instance.
	std::function<GradCheckResult(std::uint64_t)> run;
};

inline Calendar random_calendar(std::size_t nodes, std::mt19937_64& rng) {
	std::uniform_int_distribution<int> day(0, 6), month(0, 11);
	std::normal_distribution<double> z(0.0, 1.0);
	Calendar c;
	c.day_of_week = day(rng);
	c.month = month(rng);
	for (std::size_t j = 0; j < nodes; ++j) {
		c.historic.push_back(z(rng));
		c.historic_fallback.push_back(false);
	}
	return c;
}

inline GradCheckResult check_store(ParamStore& store, const std::function<Var(Tape&)>& body, Shape out_shape,
                          std::mt19937_64& rng, std::size_t max_coords, double epsilon = 1e-6) {
	const Tensor w = oracle::random_tensor(std::move(out_shape), rng);
	GradCheckOptions opts;
	opts.max_coords = max_coords;
	opts.seed = rng();
	auto f = [&](Tape& t) { return ops::dot_const(t, body(t), w); };
	return grad_check_params(store, f, epsilon, opts);
}

inline ModelConfig small_model(Variant v, std::uint64_t seed) {
	ModelConfig c;
	c.variant = v;
	c.seed = seed;
	return c;
}

inline std::vector<GradCase> grad_cases(std::size_t model_coords = 400) {
	constexpr std::size_t kNodes = 4, kTime = 12;
	std::vector<GradCase> cases;

	for (auto mode : {TokenMode::Neighbors, TokenMode::Repeated}) {
		const std::string name = mode == TokenMode::Neighbors ? "causal insight" : "causal insight, repeated tokens";
		cases.push_back({name, [mode](std::uint64_t seed) {
			                 std::mt19937_64 rng(seed);
			                 const auto ts = build_transitions(helpers::random_graph(kNodes, rng));
			                 ParamStore s;
			                 s.add("x", oracle::random_tensor({kNodes, 8}, rng));
			                 add_causal_insight_params(s, "ci", 8, mode, rng);
			                 auto body = [&](Tape& t) {
				                 return causal_insight(t, bind_causal_insight(t, s, "ci", mode), t.param(s, "x"), ts, mode);
			                 };
			                 return check_store(s, body, {kNodes, 8}, rng, 0);
		                 }});
	}

	cases.push_back({"graph diffusion", [](std::uint64_t seed) {
		                 std::mt19937_64 rng(seed);
		                 const auto supports = random_walk_powers(helpers::random_graph(kNodes, rng), 3);
		                 ParamStore s;
		                 s.add("x", oracle::random_tensor({kNodes, 3, kTime}, rng));
		                 s.add("theta", oracle::random_tensor({5, 3, 3, 2}, rng));
		                 auto body = [&](Tape& t) { return ops::diffusion(t, t.param(s, "x"), t.param(s, "theta"), supports); };
		                 return check_store(s, body, {kNodes, 5, kTime}, rng, 0);
	                 }});

	cases.push_back({"dilated causal convolution", [](std::uint64_t seed) {
		                 std::mt19937_64 rng(seed);
		                 ParamStore s;
		                 s.add("x", oracle::random_tensor({kNodes, 3, kTime}, rng));
		                 s.add("theta", oracle::random_tensor({5, 3, 3}, rng));
		                 const std::size_t d = std::size_t{1} << (seed % 4);
		                 auto body = [&](Tape& t) { return ops::causal_conv(t, t.param(s, "x"), t.param(s, "theta"), d); };
		                 return check_store(s, body, {kNodes, 5, kTime}, rng, 0);
	                 }});

	cases.push_back({"dense pair", [](std::uint64_t seed) {
		                 std::mt19937_64 rng(seed);
		                 ParamStore s;
		                 s.add("x", oracle::random_tensor({kNodes, 8, kTime}, rng));
		                 s.add("w1", oracle::random_tensor({8, 8}, rng));
		                 s.add("b1", oracle::random_tensor({1, 8}, rng));
		                 s.add("w2", oracle::random_tensor({8, 8}, rng));
		                 s.add("b2", oracle::random_tensor({1, 8}, rng));
		                 auto body = [&](Tape& t) {
			                 Var r = ops::channels_to_rows(t, t.param(s, "x"));
			                 r = ops::relu(t, dense(t, r, t.param(s, "w1"), t.param(s, "b1")));
			                 r = dense(t, r, t.param(s, "w2"), t.param(s, "b2"));
			                 return ops::rows_to_channels(t, r, kNodes, kTime);
		                 };
		                 return check_store(s, body, {kNodes, 8, kTime}, rng, 0);
	                 }});

	cases.push_back({"skip merge", [](std::uint64_t seed) {
		                 std::mt19937_64 rng(seed);
		                 ParamStore s;
		                 for (const char* k : {"a", "b", "c"}) {
			                 s.add(k, oracle::random_tensor({kNodes, 8, kTime}, rng));
		                 }
		                 auto body = [&](Tape& t) {
			                 return ops::concat_channels(t, {t.param(s, "a"), t.param(s, "b"), t.param(s, "c")});
		                 };
		                 return check_store(s, body, {kNodes, 24, kTime}, rng, 0);
	                 }});

	cases.push_back({"inherent fusion", [](std::uint64_t seed) {
		                 std::mt19937_64 rng(seed);
		                 ParamStore s;
		                 s.add("merged", oracle::random_tensor({kNodes, 16, kTime}, rng));
		                 s.add("p/embed_day", oracle::random_tensor({7, 4}, rng));
		                 s.add("p/embed_month", oracle::random_tensor({12, 4}, rng));
		                 s.add("p/embed_hist", oracle::random_tensor({1, 4}, rng));
		                 s.add("p/fuse1/w", oracle::random_tensor({16 * kTime + 12, 32}, rng, -0.1, 0.1));
		                 s.add("p/fuse1/b", oracle::random_tensor({1, 32}, rng));
		                 s.add("p/fuse2/w", oracle::random_tensor({32, kTime}, rng));
		                 s.add("p/fuse2/b", oracle::random_tensor({1, kTime}, rng));
		                 const Calendar cal = random_calendar(kNodes, rng);
		                 auto body = [&](Tape& t) {
			                 return inherent(t, bind_inherent(t, s, "p"), t.param(s, "merged"), cal, 1);
		                 };
		                 return check_store(s, body, {kNodes, 1, kTime}, rng, 1500);
	                 }});

	// Whole-model gradients include entries near 1e-7 whose central differences
	// drown in rounding at small steps, so the model uses a wider one.
	for (auto v : {Variant::CausIn, Variant::NoCausIn, Variant::BadCausIn}) {
		cases.push_back({std::string("full model ") + to_string(v), [v, model_coords](std::uint64_t seed) {
			                 std::mt19937_64 rng(seed);
			                 Model m(small_model(v, seed), helpers::random_graph(kNodes, rng), {60.0, 5.0});
			                 const Tensor window = oracle::random_tensor({kNodes, 1, kTime}, rng, -2.0, 2.0);
			                 const Calendar cal = random_calendar(kNodes, rng);
			                 auto body = [&](Tape& t) { return ops::affine(t, m.forward(t, window, cal), 0.2, -12.0); };
			                 return check_store(m.params(), body, {kNodes, 1, kTime}, rng, model_coords, 1e-4);
		                 }});
	}
	return cases;
}

// ----------------------------------------------------------- causality ----

struct CausalityTally {
	std::size_t trials = 0;
	std::size_t violations = 0;
	std::size_t unaffected = 0;  // trials where the perturbed step itself did not move the output
};

// True when y[:, :, t] is bit-identical to y0 for every t < step.
inline bool prefix_equal(const Tensor& a, const Tensor& b, std::size_t step) {
	for (std::size_t n = 0; n < a.dim(0); ++n) {
		for (std::size_t c = 0; c < a.dim(1); ++c) {
			for (std::size_t t = 0; t < step; ++t) {
				if (a(n, c, t) != b(n, c, t)) {
					return false;
				}
			}
		}
	}
	return true;
}

inline bool moved_at(const Tensor& a, const Tensor& b, std::size_t step) {
	for (std::size_t n = 0; n < a.dim(0); ++n) {
		for (std::size_t c = 0; c < a.dim(1); ++c) {
			if (a(n, c, step) != b(n, c, step)) {
				return true;
			}
		}
	}
	return false;
}

// Stacked dilated convolutions (dilation 1, 2, 4, 8) with rectifiers between.
inline Tensor tcn_stack(const std::vector<Tensor>& thetas, const Tensor& x) {
	Tape t;
	Var h = t.constant(x);
	for (std::size_t l = 0; l < thetas.size(); ++l) {
		h = ops::causal_conv(t, h, t.constant(thetas[l]), std::size_t{1} << l);
		if (l + 1 < thetas.size()) {
			h = ops::relu(t, h);
		}
	}
	return t.value(h);
}

inline void perturb(Tensor& x, std::size_t step, std::mt19937_64& rng) {
	std::uniform_int_distribution<std::size_t> node(0, x.dim(0) - 1), ch(0, x.dim(1) - 1);
	std::uniform_real_distribution<double> delta(0.1, 2.0);
	x(node(rng), ch(rng), step) += delta(rng);
}

// Splits `trials` over stacked TCNs, the window-to-merge path of the
// no-insight model and the trunk that follows the causal insight layer.
inline CausalityTally causality_trials(std::size_t trials, std::uint64_t seed) {
	CausalityTally tally;
	std::mt19937_64 rng(seed);
	constexpr std::size_t kTime = 12;
	std::uniform_int_distribution<std::size_t> step(0, kTime - 1);
	auto record = [&](const Tensor& a, const Tensor& b, std::size_t s) {
		++tally.trials;
		tally.violations += prefix_equal(a, b, s) ? 0 : 1;
		tally.unaffected += moved_at(a, b, s) ? 0 : 1;
	};

	const std::size_t third = trials / 3;
	for (std::size_t i = 0; i < third; ++i) {
		std::vector<Tensor> th{oracle::random_tensor({4, 2, 3}, rng)};
		for (int l = 1; l < 4; ++l) {
			th.push_back(oracle::random_tensor({4, 4, 3}, rng));
		}
		Tensor x = oracle::random_tensor({3, 2, kTime}, rng);
		const Tensor y0 = tcn_stack(th, x);
		const std::size_t s = step(rng);
		perturb(x, s, rng);
		record(y0, tcn_stack(th, x), s);
	}

	Model plain(small_model(Variant::NoCausIn, seed), helpers::random_graph(5, rng), {60.0, 5.0});
	for (std::size_t i = 0; i < third; ++i) {
		Tensor x = oracle::random_tensor({5, 1, kTime}, rng);
		const Calendar cal = random_calendar(5, rng);
		Tape t0;
		const Tensor m0 = t0.value(plain.trace(t0, x, cal).merged);
		const std::size_t s = step(rng);
		perturb(x, s, rng);
		Tape t1;
		record(m0, t1.value(plain.trace(t1, x, cal).merged), s);
	}

	Model insight(small_model(Variant::CausIn, seed + 1), helpers::random_graph(5, rng), {60.0, 5.0});
	for (std::size_t i = 2 * third; i < trials; ++i) {
		const Tensor window = oracle::random_tensor({5, 1, kTime}, rng);
		const Calendar cal = random_calendar(5, rng);
		Tape t0;
		Tensor h = t0.value(insight.trace(t0, window, cal).block_input);
		const Tensor m0 = t0.value(insight.trunk(t0, t0.constant(h)));
		const std::size_t s = step(rng);
		perturb(h, s, rng);
		Tape t1;
		record(m0, t1.value(insight.trunk(t1, t1.constant(h))), s);
	}
	return tally;
}

} // namespace probes
