#include <doctest.h>

#include <cmath>

#include "gtcausin/error.hpp"
#include "gtcausin/graph.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gtc;

TEST_CASE("adjacency kernel examples") {
	auto self = build_adjacency({"a"}, {{"a", "a", 0.0}}, 1.0, 10.0);
	CHECK(self.adjacency(0, 0) == 1.0);
	auto far = build_adjacency({"a", "b"}, {{"a", "b", 11.0}}, 1.0, 10.0);
	CHECK(far.adjacency(0, 1) == 0.0);
	auto mid = build_adjacency({"a", "b"}, {{"a", "b", 2.0}}, 2.0, 10.0);
	CHECK(std::abs(mid.adjacency(0, 1) - 0.36787944117144233) < 1e-15);
	CHECK(mid.adjacency(1, 0) == 0.0);
	CHECK(mid.adjacency(1, 1) == 1.0);
	CHECK_THROWS_AS(build_adjacency({"a"}, {{"a", "z", 1.0}}, 1.0, 10.0), InputError);
	CHECK_THROWS_AS(build_adjacency({"a", "b"}, {{"a", "b", -1.0}}, 1.0, 10.0), InputError);
	auto inferred = build_adjacency({{"x", "y", 1.0}, {"y", "z", 1.0}}, 1.0, 10.0);
	CHECK(inferred.node_ids == std::vector<std::string>{"x", "y", "z"});
}

TEST_CASE("transition examples") {
	SensorGraph g{{"a", "b"}, Tensor::from_rows({{1, 0.5}, {0, 1}})};
	auto ts = build_transitions(g);
	CHECK(ts.w_o1 == Tensor::from_rows({{0, 0.5}, {0, 0}}));
	CHECK(ts.t_o1 == Tensor::from_rows({{0, 1}, {0, 0}}));
	CHECK(ts.t_i1 == Tensor::from_rows({{0, 0}, {1, 0}}));

	SensorGraph chain{{"a", "b", "c"}, Tensor::from_rows({{1, 1, 0}, {0, 1, 1}, {0, 0, 1}})};
	auto tc = build_transitions(chain);
	for (std::size_t i = 0; i < 3; ++i) {
		for (std::size_t j = 0; j < 3; ++j) {
			CHECK(tc.w_o2(i, j) == (i == 0 && j == 2 ? 1.0 : 0.0));
			CHECK(tc.w_i2(i, j) == (i == 2 && j == 0 ? 1.0 : 0.0));
		}
	}
}

TEST_CASE("transition invariants on random graphs") {
	std::mt19937_64 rng(11);
	for (int trial = 0; trial < 100; ++trial) {
		auto g = helpers::random_graph(5 + trial % 4, rng, 0.3);
		auto ts = build_transitions(g);
		const Tensor* pairs[4][2] = {{&ts.w_i1, &ts.t_i1}, {&ts.w_o1, &ts.t_o1}, {&ts.w_i2, &ts.t_i2}, {&ts.w_o2, &ts.t_o2}};
		for (auto& [w, t] : pairs) {
			for (std::size_t i = 0; i < w->dim(0); ++i) {
				double ws = 0.0, ts_ = 0.0;
				for (std::size_t j = 0; j < w->dim(1); ++j) {
					ws += (*w)(i, j);
					ts_ += (*t)(i, j);
					CHECK((*w)(i, j) >= 0.0);
				}
				if (ws > 0.0) {
					CHECK(std::abs(ts_ - 1.0) < 1e-9);
				} else {
					CHECK(ts_ == 0.0);
				}
			}
		}
		for (std::size_t i = 0; i < g.node_count(); ++i) {
			CHECK(ts.w_i2(i, i) == 0.0);
			CHECK(ts.w_o2(i, i) == 0.0);
		}
		CHECK(ts.w_i1 == ts.w_o1.transposed());
	}
}

TEST_CASE("aggregate examples and contraction") {
	std::mt19937_64 rng(12);
	SensorGraph line{{"a", "b", "c"}, Tensor::from_rows({{1, 0.4, 0}, {0.2, 1, 0.7}, {0, 0, 1}})};
	auto ts = build_transitions(line);
	Tensor c({3, 1}, 2.5);
	auto agg = aggregate(ts, Neighborhood::O1, c);
	CHECK(agg(0, 0) == doctest::Approx(2.5));
	CHECK(agg(1, 0) == doctest::Approx(2.5));
	CHECK(agg(2, 0) == 0.0);
	Tensor v = Tensor::from_rows({{1}, {2}, {3}});
	CHECK(max_abs_diff(aggregate(ts, Neighborhood::O1, v), oracle::matmul(ts.t_o1, v)) < 1e-15);
	CHECK(max_abs_diff(aggregate(ts, Neighborhood::O1, v), oracle::matmul(oracle::forward_walk(ts.w_o1), v)) < 1e-15);
	CHECK_THROWS_AS(aggregate(ts, Neighborhood::I1, Tensor({2, 1})), InputError);
	for (int trial = 0; trial < 50; ++trial) {
		auto g = helpers::random_graph(6, rng);
		auto t = build_transitions(g);
		Tensor x = oracle::random_tensor({6, 3}, rng, -5.0, 5.0);
		for (auto which : {Neighborhood::I1, Neighborhood::O1, Neighborhood::I2, Neighborhood::O2}) {
			CHECK(aggregate(t, which, x).max_abs() <= x.max_abs() + 1e-12);
		}
	}
}

TEST_CASE("symmetric distance table gives transposed in and out weights") {
	std::vector<DistanceRecord> d{{"a", "b", 300}, {"b", "a", 300}, {"b", "c", 800}, {"c", "b", 800}};
	auto g = build_adjacency(d, 1000.0, 2000.0);
	auto ts = build_transitions(g);
	CHECK(ts.w_i1 == ts.w_o1);
	CHECK(ts.w_i1 == ts.w_o1.transposed());
}

TEST_CASE("random walk powers and tail norm") {
	std::mt19937_64 rng(13);
	auto g = helpers::random_graph(5, rng);
	auto p = random_walk_powers(g, 3);
	REQUIRE(p.size() == 6);
	CHECK(p[0] == Tensor::identity(5));
	CHECK(p[1] == Tensor::identity(5));
	for (std::size_t k = 0; k < 3; ++k) {
		CHECK(max_abs_diff(p[2 * k], oracle::matpow(oracle::forward_walk(g.adjacency), k)) < 1e-14);
		CHECK(max_abs_diff(p[2 * k + 1], oracle::matpow(oracle::reverse_walk(g.adjacency), k)) < 1e-14);
	}
	CHECK(diffusion_tail_norm(g, 1.0, 4) == 0.0);
	CHECK(diffusion_tail_norm(g, 0.5, 3) == 0.0625);
	CHECK(std::abs(diffusion_tail_norm(g, 0.1, 2) - 0.729) < 1e-15);
}

TEST_CASE("graph files round trip") {
	auto dir = helpers::scratch_dir("graph");
	std::vector<DistanceRecord> d{{"a", "b", 123.5}, {"b", "c", 900}};
	write_distance_csv((dir / "d.csv").string(), d);
	auto back = read_distance_csv((dir / "d.csv").string());
	REQUIRE(back.size() == 2);
	CHECK(back[0].meters == 123.5);
	CHECK(back[1].to == "c");
	auto g = build_adjacency(back, 500.0, 1000.0);
	write_adjacency_csv((dir / "a.csv").string(), g);
	auto h = read_adjacency_csv((dir / "a.csv").string());
	CHECK(h.node_ids == g.node_ids);
	CHECK(h.adjacency == g.adjacency);
}
