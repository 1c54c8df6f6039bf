#include "gtcausin/graph.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gtcausin/csv.hpp"
#include "gtcausin/error.hpp"
#include "gtcausin/kernels.hpp"

namespace gtc {

std::size_t SensorGraph::index_of(const std::string& id) const {
	for (std::size_t i = 0; i < node_ids.size(); ++i) {
		if (node_ids[i] == id) {
			return i;
		}
	}
	throw InputError("unknown sensor id '" + id + "'");
}

const char* to_string(Neighborhood n) {
	switch (n) {
	case Neighborhood::I1: return "I1";
	case Neighborhood::O1: return "O1";
	case Neighborhood::I2: return "I2";
	case Neighborhood::O2: return "O2";
	}
	return "?";
}

SensorGraph build_adjacency(const std::vector<std::string>& node_ids, const std::vector<DistanceRecord>& distances,
                            double sigma, double kappa) {
	require(sigma > 0.0, "sigma must be positive");
	require(kappa > 0.0, "kappa must be positive");
	require(!node_ids.empty(), "graph needs at least one node");
	std::unordered_map<std::string, std::size_t> index;
	for (std::size_t i = 0; i < node_ids.size(); ++i) {
		if (!index.emplace(node_ids[i], i).second) {
			throw InputError("duplicate sensor id '" + node_ids[i] + "'");
		}
	}
	const std::size_t n = node_ids.size();
	SensorGraph g{node_ids, Tensor({n, n})};
	std::map<std::pair<std::size_t, std::size_t>, double> seen;
	for (const auto& r : distances) {
		const auto fi = index.find(r.from);
		const auto ti = index.find(r.to);
		if (fi == index.end()) {
			throw InputError("distance row references unknown sensor '" + r.from + "'");
		}
		if (ti == index.end()) {
			throw InputError("distance row references unknown sensor '" + r.to + "'");
		}
		if (!(r.meters >= 0.0) || !std::isfinite(r.meters)) {
			throw InputError("negative or non-finite distance for " + r.from + " -> " + r.to);
		}
		const auto key = std::make_pair(fi->second, ti->second);
		if (auto it = seen.find(key); it != seen.end() && it->second != r.meters) {
			throw InputError("conflicting distances for " + r.from + " -> " + r.to);
		}
		seen[key] = r.meters;
		if (r.meters <= kappa) {
			g.adjacency(key.first, key.second) = std::exp(-(r.meters * r.meters) / (sigma * sigma));
		}
	}
	for (std::size_t i = 0; i < n; ++i) {
		g.adjacency(i, i) = 1.0;
	}
	return g;
}

SensorGraph build_adjacency(const std::vector<DistanceRecord>& distances, double sigma, double kappa) {
	std::vector<std::string> ids;
	std::set<std::string> seen;
	for (const auto& r : distances) {
		for (const auto* id : {&r.from, &r.to}) {
			if (seen.insert(*id).second) {
				ids.push_back(*id);
			}
		}
	}
	return build_adjacency(ids, distances, sigma, kappa);
}

Tensor row_normalize(const Tensor& m) {
	require(m.rank() == 2, "row_normalize: rank-2 matrix required");
	Tensor out = m;
	for (std::size_t i = 0; i < m.dim(0); ++i) {
		double s = 0.0;
		for (std::size_t j = 0; j < m.dim(1); ++j) {
			s += m(i, j);
		}
		if (s > 0.0) {
			for (std::size_t j = 0; j < m.dim(1); ++j) {
				out(i, j) = m(i, j) / s;
			}
		} else {
			for (std::size_t j = 0; j < m.dim(1); ++j) {
				out(i, j) = 0.0;
			}
		}
	}
	return out;
}

namespace {

Tensor zero_diagonal(Tensor m) {
	for (std::size_t i = 0; i < m.dim(0); ++i) {
		m(i, i) = 0.0;
	}
	return m;
}

Tensor square(const Tensor& m) {
	const std::size_t n = m.dim(0);
	Tensor out({n, n});
	kernels::gemm_nn(n, n, n, m.data(), m.data(), out.data());
	return out;
}

std::vector<double> row_sums(const Tensor& m) {
	std::vector<double> s(m.dim(0), 0.0);
	for (std::size_t i = 0; i < m.dim(0); ++i) {
		for (std::size_t j = 0; j < m.dim(1); ++j) {
			s[i] += m(i, j);
		}
	}
	return s;
}

} // namespace

TransitionSet build_transitions(const SensorGraph& graph) {
	const Tensor& w = graph.adjacency;
	require(w.rank() == 2 && w.dim(0) == w.dim(1) && w.dim(0) == graph.node_count(),
	        "adjacency must be square with one row per node");
	for (double v : w.data()) {
		require(v >= 0.0, "adjacency entries must be non-negative");
	}
	TransitionSet ts;
	// Self-loops are excluded by zeroing the diagonal rather than subtracting
	// the identity, so inputs without a unit diagonal stay non-negative.
	ts.w_o1 = zero_diagonal(w);
	ts.w_i1 = zero_diagonal(w.transposed());
	ts.w_o2 = zero_diagonal(square(ts.w_o1));
	ts.w_i2 = zero_diagonal(square(ts.w_i1));
	ts.t_i1 = row_normalize(ts.w_i1);
	ts.t_o1 = row_normalize(ts.w_o1);
	ts.t_i2 = row_normalize(ts.w_i2);
	ts.t_o2 = row_normalize(ts.w_o2);
	ts.d_i = row_sums(ts.w_i1);
	ts.d_o = row_sums(ts.w_o1);
	return ts;
}

const Tensor& transition_matrix(const TransitionSet& transitions, Neighborhood which) {
	switch (which) {
	case Neighborhood::I1: return transitions.t_i1;
	case Neighborhood::O1: return transitions.t_o1;
	case Neighborhood::I2: return transitions.t_i2;
	case Neighborhood::O2: return transitions.t_o2;
	}
	throw InputError("unknown neighborhood");
}

Tensor aggregate(const TransitionSet& transitions, Neighborhood which, const Tensor& signal) {
	const Tensor& t = transition_matrix(transitions, which);
	require(signal.rank() == 2, "aggregate: signal must be [N x F]");
	if (signal.dim(0) != t.dim(0)) {
		throw InputError("aggregate: signal has " + std::to_string(signal.dim(0)) + " rows, graph has " +
		                 std::to_string(t.dim(0)) + " nodes");
	}
	const std::size_t n = t.dim(0), f = signal.dim(1);
	Tensor out({n, f});
	kernels::gemm_nn(n, n, f, t.data(), signal.data(), out.data());
	return out;
}

std::vector<Tensor> random_walk_powers(const SensorGraph& graph, std::size_t steps) {
	require(steps >= 1, "diffusion needs at least one step");
	const std::size_t n = graph.node_count();
	const Tensor fwd = row_normalize(graph.adjacency);
	const Tensor rev = row_normalize(graph.adjacency.transposed());
	std::vector<Tensor> out;
	out.reserve(2 * steps);
	Tensor pf = Tensor::identity(n);
	Tensor pr = Tensor::identity(n);
	for (std::size_t k = 0; k < steps; ++k) {
		out.push_back(pf);
		out.push_back(pr);
		Tensor nf({n, n});
		Tensor nr({n, n});
		kernels::gemm_nn(n, n, n, pf.data(), fwd.data(), nf.data());
		kernels::gemm_nn(n, n, n, pr.data(), rev.data(), nr.data());
		pf = std::move(nf);
		pr = std::move(nr);
	}
	return out;
}

double diffusion_tail_norm(const SensorGraph& graph, double alpha, std::size_t k_max) {
	require(graph.node_count() > 0, "diffusion_tail_norm: empty graph");
	require(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
	return std::pow(1.0 - alpha, static_cast<double>(k_max + 1));
}

std::vector<DistanceRecord> read_distance_csv(const std::string& path) {
	const auto lines = csv::read_lines(path);
	if (lines.empty()) {
		throw InputError("distance file '" + path + "' is empty");
	}
	const auto header = csv::split(lines[0]);
	if (header != std::vector<std::string>{"from", "to", "cost"}) {
		throw InputError("distance file header must be 'from,to,cost'");
	}
	std::vector<DistanceRecord> out;
	for (std::size_t i = 1; i < lines.size(); ++i) {
		const auto f = csv::split(lines[i]);
		if (f.size() != 3) {
			throw InputError("distance file line " + std::to_string(i + 1) + ": expected 3 fields");
		}
		const auto cost = csv::parse_double(f[2]);
		if (!cost) {
			throw InputError("distance file line " + std::to_string(i + 1) + ": bad cost '" + f[2] + "'");
		}
		out.push_back({f[0], f[1], *cost});
	}
	return out;
}

void write_distance_csv(const std::string& path, const std::vector<DistanceRecord>& distances) {
	std::ostringstream os;
	os << "from,to,cost\n";
	for (const auto& r : distances) {
		os << r.from << ',' << r.to << ',' << csv::format_double(r.meters) << '\n';
	}
	csv::write_text(path, os.str());
}

void write_adjacency_csv(const std::string& path, const SensorGraph& graph) {
	std::ostringstream os;
	os << "id";
	for (const auto& id : graph.node_ids) {
		os << ',' << id;
	}
	os << '\n';
	for (std::size_t i = 0; i < graph.node_count(); ++i) {
		os << graph.node_ids[i];
		for (std::size_t j = 0; j < graph.node_count(); ++j) {
			os << ',' << csv::format_double(graph.adjacency(i, j));
		}
		os << '\n';
	}
	csv::write_text(path, os.str());
}

SensorGraph read_adjacency_csv(const std::string& path) {
	const auto lines = csv::read_lines(path);
	if (lines.empty()) {
		throw InputError("adjacency file '" + path + "' is empty");
	}
	auto header = csv::split(lines[0]);
	if (header.empty() || header[0] != "id") {
		throw InputError("adjacency header must start with 'id'");
	}
	std::vector<std::string> ids(header.begin() + 1, header.end());
	const std::size_t n = ids.size();
	if (lines.size() != n + 1) {
		throw InputError("adjacency file must have one row per node");
	}
	SensorGraph g{ids, Tensor({n, n})};
	for (std::size_t i = 0; i < n; ++i) {
		const auto f = csv::split(lines[i + 1]);
		if (f.size() != n + 1 || f[0] != ids[i]) {
			throw InputError("adjacency row " + std::to_string(i + 1) + " malformed");
		}
		for (std::size_t j = 0; j < n; ++j) {
			const auto v = csv::parse_double(f[j + 1]);
			if (!v || *v < 0.0 || !std::isfinite(*v)) {
				throw InputError("adjacency row " + std::to_string(i + 1) + ": bad weight");
			}
			g.adjacency(i, j) = *v;
		}
	}
	return g;
}

} // namespace gtc
