#pragma once

#include <string>
#include <vector>

#include "gtcausin/tensor.hpp"

namespace gtc {

struct DistanceRecord {
	std::string from;
	std::string to;
	double meters = 0.0;
};

// Directed weighted sensor graph. adjacency(i, j) is the weight of edge i -> j.
struct SensorGraph {
	std::vector<std::string> node_ids;
	Tensor adjacency;

	std::size_t node_count() const noexcept { return node_ids.size(); }
	std::size_t index_of(const std::string& id) const;
};

// First- and second-order neighbour weights and their row-normalised
// transition matrices. "in" matrices are built from the transposed adjacency,
// so row i of t_i1 averages over the sensors that feed into sensor i.
struct TransitionSet {
	Tensor w_i1, w_o1, w_i2, w_o2;
	Tensor t_i1, t_o1, t_i2, t_o2;
	std::vector<double> d_i, d_o;
};

enum class Neighborhood { I1, O1, I2, O2 };

const char* to_string(Neighborhood n);

// Gaussian kernel on road distance, thresholded: w = exp(-d^2 / sigma^2) for
// d <= kappa, else 0. Unlisted pairs count as d > kappa; self-distance is 0.
SensorGraph build_adjacency(const std::vector<std::string>& node_ids, const std::vector<DistanceRecord>& distances,
                            double sigma, double kappa);
// Node set taken from the distance list in order of first appearance.
SensorGraph build_adjacency(const std::vector<DistanceRecord>& distances, double sigma, double kappa);

TransitionSet build_transitions(const SensorGraph& graph);

// Row i divided by its sum; zero-sum rows stay zero.
Tensor row_normalize(const Tensor& m);

// transitions.t_<which> * signal, signal is [N x F].
Tensor aggregate(const TransitionSet& transitions, Neighborhood which, const Tensor& signal);
const Tensor& transition_matrix(const TransitionSet& transitions, Neighborhood which);

// Powers 0..K-1 of the forward (D_O^-1 W) and reverse (D_I^-1 W^T) random-walk
// matrices, interleaved as result[2k + dir] with dir 0 = forward.
std::vector<Tensor> random_walk_powers(const SensorGraph& graph, std::size_t steps);

// Weight left beyond k_max in the geometric series sum_k alpha (1 - alpha)^k,
// i.e. (1 - alpha)^(k_max + 1).
double diffusion_tail_norm(const SensorGraph& graph, double alpha, std::size_t k_max);

std::vector<DistanceRecord> read_distance_csv(const std::string& path);
void write_distance_csv(const std::string& path, const std::vector<DistanceRecord>& distances);
void write_adjacency_csv(const std::string& path, const SensorGraph& graph);
SensorGraph read_adjacency_csv(const std::string& path);

} // namespace gtc
