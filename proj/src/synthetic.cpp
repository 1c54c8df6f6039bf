#include "gtcausin/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "gtcausin/error.hpp"

namespace gtc {

namespace {

constexpr Timestamp kStart = 1704067200;  // 2024-01-01 00:00:00, a Monday
constexpr std::int64_t kSpacing = 300;

std::string node_name(std::size_t i) {
	char buf[16];
	std::snprintf(buf, sizeof buf, "S%03zu", i);
	return buf;
}

SpeedDataset empty_dataset(std::size_t nodes, std::size_t steps) {
	SpeedDataset ds;
	for (std::size_t i = 0; i < nodes; ++i) {
		ds.node_ids.push_back(node_name(i));
	}
	for (std::size_t t = 0; t < steps; ++t) {
		ds.timestamps.push_back(kStart + static_cast<Timestamp>(t) * kSpacing);
	}
	ds.speeds = Tensor({steps, nodes});
	ds.observed.assign(steps * nodes, 1);
	return ds;
}

SyntheticData with_graph(const SyntheticGraphOptions& g, std::size_t steps) {
	SyntheticData out;
	out.distances = synthetic_distances(g);
	out.sigma = g.sigma;
	out.kappa = g.kappa;
	out.dataset = empty_dataset(g.nodes, steps);
	out.graph = build_adjacency(out.dataset.node_ids, out.distances, g.sigma, g.kappa);
	return out;
}

} // namespace

std::vector<DistanceRecord> synthetic_distances(const SyntheticGraphOptions& g) {
	require(g.nodes >= 2, "synthetic graph needs at least two nodes");
	std::mt19937_64 rng(g.seed ^ 0x9e3779b97f4a7c15ULL);
	std::uniform_real_distribution<double> ring(200.0, 1200.0);
	std::uniform_real_distribution<double> chord(300.0, 2500.0);
	std::uniform_int_distribution<std::size_t> pick(0, g.nodes - 1);
	std::vector<DistanceRecord> out;
	for (std::size_t i = 0; i < g.nodes; ++i) {
		out.push_back({node_name(i), node_name((i + 1) % g.nodes), std::round(ring(rng))});
	}
	const auto chords = static_cast<std::size_t>(std::llround(g.chord_fraction * static_cast<double>(g.nodes)));
	for (std::size_t c = 0; c < chords; ++c) {
		const std::size_t a = pick(rng);
		std::size_t b = pick(rng);
		if (b == a || b == (a + 1) % g.nodes) {
			continue;
		}
		bool dup = false;
		for (const auto& r : out) {
			dup = dup || (r.from == node_name(a) && r.to == node_name(b));
		}
		if (!dup) {
			out.push_back({node_name(a), node_name(b), std::round(chord(rng))});
		}
	}
	return out;
}

SyntheticData make_planted(const SyntheticGraphOptions& g, const PlantedOptions& p) {
	require(p.steps >= 2, "planted series needs at least two steps");
	require(p.missing_rate >= 0.0 && p.missing_rate < 1.0, "missing rate must be in [0, 1)");
	SyntheticData out = with_graph(g, p.steps);
	const TransitionSet ts = build_transitions(out.graph);
	const std::size_t n = g.nodes;

	std::mt19937_64 rng(p.seed);
	std::normal_distribution<double> unit(0.0, 1.0);
	std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
	std::uniform_real_distribution<double> coin(0.0, 1.0);
	std::vector<double> day_phase(n);
	for (auto& ph : day_phase) {
		ph = phase(rng);
	}

	std::vector<double> y(n, 0.0), v(n, 0.0), e(n), next(n);
	auto mix = [&](const Tensor& m, const std::vector<double>& x, std::size_t i) {
		double s = 0.0;
		for (std::size_t j = 0; j < n; ++j) {
			s += m(i, j) * x[j];
		}
		return s;
	};
	// Burn-in so the series starts near its stationary regime.
	const std::size_t burn = 200;
	for (std::size_t t = 0; t < burn + p.steps; ++t) {
		for (auto& x : e) {
			x = p.shock_std * unit(rng);
		}
		for (std::size_t i = 0; i < n; ++i) {
			const double shock = (1.0 - p.shock_rho) * e[i] + p.shock_rho * 0.5 * (mix(ts.t_i1, e, i) + mix(ts.t_o1, e, i));
			next[i] = p.phi * v[i] + p.beta_in * mix(ts.t_i1, v, i) + p.beta_out * mix(ts.t_o1, v, i) -
			          p.reversion * y[i] + shock;
		}
		v = next;
		for (std::size_t i = 0; i < n; ++i) {
			y[i] += v[i];
		}
		if (t < burn) {
			continue;
		}
		const std::size_t s = t - burn;
		const double tod = 2.0 * std::numbers::pi * static_cast<double>(s % 288) / 288.0;
		for (std::size_t i = 0; i < n; ++i) {
			const double noise = p.obs_noise * unit(rng);
			const double val = p.base_speed + p.daily_amplitude * std::sin(tod + day_phase[i]) + y[i] + noise;
			const bool drop = p.missing_rate > 0.0 && coin(rng) < p.missing_rate;
			if (drop) {
				out.dataset.observed[s * n + i] = 0;
			} else {
				out.dataset.speeds(s, i) = val;
			}
		}
	}
	return out;
}

SyntheticData make_periodic(const SyntheticGraphOptions& g, const PeriodicOptions& p) {
	require(p.steps >= 2, "periodic series needs at least two steps");
	SyntheticData out = with_graph(g, p.steps);
	const std::size_t n = g.nodes;
	std::mt19937_64 rng(p.seed);
	std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
	std::uniform_real_distribution<double> slow(5.0, 10.0);
	std::uniform_real_distribution<double> fast(2.0, 5.0);
	for (std::size_t i = 0; i < n; ++i) {
		const double a = slow(rng), pa = phase(rng), b = fast(rng), pb = phase(rng);
		for (std::size_t t = 0; t < p.steps; ++t) {
			const double x = static_cast<double>(t);
			out.dataset.speeds(t, i) = p.base_speed + a * std::sin(2.0 * std::numbers::pi * x / 288.0 + pa) +
			                           b * std::sin(2.0 * std::numbers::pi * x / 48.0 + pb);
		}
	}
	return out;
}

} // namespace gtc
