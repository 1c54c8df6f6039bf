#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtcausin/data.hpp"
#include "gtcausin/graph.hpp"

namespace gtc {

// Directed ring with random chords. Ring edges are short, chords longer, so
// after thresholding nodes end up with different in/out degrees.
struct SyntheticGraphOptions {
	std::size_t nodes = 20;
	double chord_fraction = 0.5;  // chords per node
	double sigma = 1000.0;
	double kappa = 2000.0;
	std::uint64_t seed = 0;
};

// Planted neighbour-lag process. Per node, the speed change v follows
//   v(t+1) = phi v(t) + beta_in (T_i1 v(t)) + beta_out (T_o1 v(t)) - kappa y(t) + s(t)
//   y(t+1) = y(t) + v(t+1)
// where s is Gaussian noise shared with first-order neighbours,
//   s = (1 - rho) e + rho (T_i1 e + T_o1 e) / 2,
// and speed = base + daily profile + y + observation noise.
struct PlantedOptions {
	std::size_t steps = 2000;
	double phi = 0.5;
	double beta_in = 0.3;
	double beta_out = 0.1;
	double reversion = 0.05;
	double shock_std = 1.0;
	double shock_rho = 0.6;
	double obs_noise = 0.1;
	double base_speed = 60.0;
	double daily_amplitude = 5.0;
	double missing_rate = 0.0;
	std::uint64_t seed = 0;
};

// Noise-free sum of a daily and a faster sinusoid per node.
struct PeriodicOptions {
	std::size_t steps = 2000;
	double base_speed = 60.0;
	std::uint64_t seed = 0;
};

struct SyntheticData {
	SpeedDataset dataset;  // not yet split
	std::vector<DistanceRecord> distances;
	SensorGraph graph;
	double sigma = 0.0;
	double kappa = 0.0;
};

// Timestamps start on Monday 2024-01-01 00:00:00 at 5-minute spacing.
SyntheticData make_planted(const SyntheticGraphOptions& g, const PlantedOptions& p);
SyntheticData make_periodic(const SyntheticGraphOptions& g, const PeriodicOptions& p);

std::vector<DistanceRecord> synthetic_distances(const SyntheticGraphOptions& g);

} // namespace gtc
