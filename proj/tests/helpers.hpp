#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gtcausin/graph.hpp"

namespace helpers {

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
	auto p = std::filesystem::temp_directory_path() / ("gtcausin_test_" + name);
	std::filesystem::remove_all(p);
	std::filesystem::create_directories(p);
	return p;
}

// Random directed graph with unit diagonal and weights in (0, 1].
inline gtc::SensorGraph random_graph(std::size_t n, std::mt19937_64& rng, double density = 0.4) {
	std::uniform_real_distribution<double> u(0.0, 1.0);
	gtc::SensorGraph g;
	for (std::size_t i = 0; i < n; ++i) {
		g.node_ids.push_back("n" + std::to_string(i));
	}
	g.adjacency = gtc::Tensor({n, n});
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			if (i == j) {
				g.adjacency(i, j) = 1.0;
			} else if (u(rng) < density) {
				g.adjacency(i, j) = 0.05 + 0.95 * u(rng);
			}
		}
	}
	return g;
}

} // namespace helpers
