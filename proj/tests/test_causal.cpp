#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "gtcausin/causal.hpp"
#include "gtcausin/csv.hpp"
#include "gtcausin/error.hpp"
#include "gtcausin/synthetic.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gtc;

namespace {

SpeedDataset scripted(std::size_t steps, const std::vector<std::function<double(double)>>& f) {
	SpeedDataset ds;
	for (std::size_t j = 0; j < f.size(); ++j) {
		ds.node_ids.push_back(std::string(1, static_cast<char>('a' + j)));
	}
	ds.speeds = Tensor({steps, f.size()});
	ds.observed.assign(steps * f.size(), 1);
	for (std::size_t t = 0; t < steps; ++t) {
		ds.timestamps.push_back(1704067200 + static_cast<Timestamp>(t) * 300);
		for (std::size_t j = 0; j < f.size(); ++j) {
			ds.speeds(t, j) = f[j](static_cast<double>(t));
		}
	}
	return ds;
}

// a -> b (0.8), b -> c (0.5), a -> c (0.2).
SensorGraph chain() {
	return {{"a", "b", "c"}, Tensor::from_rows({{1, 0.8, 0.2}, {0, 1, 0.5}, {0, 0, 1}})};
}

SyntheticData planted(std::size_t nodes, std::size_t steps, std::uint64_t seed, double shock = 1.0) {
	SyntheticGraphOptions g;
	g.nodes = nodes;
	g.seed = seed;
	PlantedOptions p;
	p.steps = steps;
	p.seed = seed;
	p.shock_std = shock;
	return make_planted(g, p);
}

RelationMatrix swap_neighbour_sides(const RelationMatrix& m) {
	auto relabel = [](std::size_t v) {
		const std::size_t k = v % 5, s = v / 5;
		const std::size_t swapped[5] = {0, 2, 1, 4, 3};
		return s * 5 + swapped[k];
	};
	RelationMatrix out = m;
	for (std::size_t i = 0; i < 30; ++i) {
		for (std::size_t j = 0; j < 30; ++j) {
			out.c(relabel(i), relabel(j)) = m.c(i, j);
		}
	}
	return out;
}

} // namespace

TEST_CASE("variable names follow slice-major order") {
	const auto& names = causal_variable_names();
	REQUIRE(names.size() == 30);
	CHECK(names[0] == "X(t)");
	CHECK(names[4] == "O2(t)");
	CHECK(names[5] == "X(t+1)");
	CHECK(names[29] == "O2(t+5)");
}

TEST_CASE("speed variation") {
	CHECK(speed_variation(std::vector<double>{60, 55, 65}) == std::vector<double>{-5, 10});
	CHECK(speed_variation(std::vector<double>(5, 42.0)) == std::vector<double>(4, 0.0));
	CHECK_THROWS_AS(speed_variation(std::vector<double>{1.0}), InputError);
	std::mt19937_64 rng(51);
	std::normal_distribution<double> z(60.0, 5.0);
	std::vector<double> s(50);
	for (auto& v : s) {
		v = z(rng);
	}
	auto d = speed_variation(s);
	double acc = s[0];
	for (std::size_t i = 0; i < d.size(); ++i) {
		acc += d[i];
		CHECK(std::abs(acc - s[i + 1]) < 1e-9);
	}
}

TEST_CASE("variable extraction on a hand-built chain") {
	auto f_a = [](double t) { return 60.0 + t; };
	auto f_b = [](double t) { return 50.0 + t * t; };
	auto f_c = [](double t) { return 40.0 - 2.0 * t + 0.5 * t * t * t / 10.0; };
	auto ds = scripted(20, {f_a, f_b, f_c});
	const auto ts = build_transitions(chain());
	const std::size_t t0 = 2;
	auto a = extract_variables(ds, ts, 0, t0);
	auto c = extract_variables(ds, ts, 2, t0);
	REQUIRE(a.has_value());
	REQUIRE(c.has_value());
	for (std::size_t s = 0; s < 6; ++s) {
		const double t = static_cast<double>(t0 + s);
		auto delta = [&](auto&& g) { return g(t + 1.0) - g(t); };
		// Node a: no in-neighbours, O1 = 0.8 b + 0.2 c, O2 = c through b.
		const double a_expect[5] = {delta(f_a), 0.0, 0.8 * delta(f_b) + 0.2 * delta(f_c), 0.0, delta(f_c)};
		// Node c: I1 = (0.2 a + 0.5 b) / 0.7, I2 = a through b, no out-neighbours.
		const double c_expect[5] = {delta(f_c), (0.2 * delta(f_a) + 0.5 * delta(f_b)) / 0.7, 0.0, delta(f_a), 0.0};
		for (std::size_t k = 0; k < 5; ++k) {
			CHECK(std::abs((*a)[s * 5 + k] - a_expect[k]) < 1e-12);
			CHECK(std::abs((*c)[s * 5 + k] - c_expect[k]) < 1e-12);
		}
	}
	auto flat = scripted(12, {[](double) { return 55.0; }, [](double) { return 61.0; }, [](double) { return 58.0; }});
	auto z = extract_variables(flat, ts, 1, 0);
	REQUIRE(z.has_value());
	for (double v : *z) {
		CHECK(v == 0.0);
	}
	// A missing reading anywhere in the node's two-hop neighbourhood rejects the sample.
	ds.observed[(t0 + 4) * 3 + 2] = 0;
	CHECK(!extract_variables(ds, ts, 0, t0).has_value());
	CHECK(!extract_variables(ds, ts, 0, 6).has_value());
	CHECK(extract_variables(ds, ts, 0, t0 + 4 + 1).has_value());
}

TEST_CASE("scaling speeds scales variables and leaves correlations unchanged") {
	auto d = planted(8, 400, 3);
	const auto ts = build_transitions(d.graph);
	auto scaled = d.dataset;
	for (auto& v : scaled.speeds.storage()) {
		v *= 1.6;
	}
	SampleOptions o;
	o.batch_size = 200;
	o.repeats = 2;
	auto a = sample_batches(d.dataset, ts, o);
	auto b = sample_batches(scaled, ts, o);
	REQUIRE(a.batches.size() == 2);
	for (std::size_t i = 0; i < a.batches[0].rows.size(); ++i) {
		CHECK(std::abs(b.batches[0].rows[i] - 1.6 * a.batches[0].rows[i]) < 1e-9);
	}
	CHECK(max_abs_diff(pearson_matrix(a.batches).c, pearson_matrix(b.batches).c) < 1e-9);
}

TEST_CASE("event detection") {
	auto flat = scripted(60, {[](double) { return 60.0; }, [](double) { return 50.0; }});
	SensorGraph g2{{"a", "b"}, Tensor::from_rows({{1, 0.5}, {0.5, 1}})};
	CHECK(detect_events(flat, build_transitions(g2)).empty());

	auto d = planted(10, 600, 4, 0.3);
	prepare_splits(d.dataset);
	const auto ts = build_transitions(d.graph);
	// A step drop that persists, so only its onset crosses the threshold.
	auto inject = [&](SpeedDataset& ds, std::size_t node, std::size_t at, double drop) {
		for (std::size_t t = at; t < ds.steps(); ++t) {
			ds.speeds(t, node) += drop;
		}
	};
	auto one = d.dataset;
	inject(one, 3, 300, -20.0);
	auto ev = detect_events(one, ts);
	REQUIRE(!ev.empty());
	CHECK(ev[0].node == 3);
	CHECK(ev[0].t + 3 >= 300);
	CHECK(ev[0].t <= 300);
	CHECK(ev[0].magnitude < 0.0);
	CHECK(ev[0].duration >= 3);

	auto two = d.dataset;
	inject(two, 2, 200, -20.0);
	inject(two, 7, 400, -30.0);
	auto ev2 = detect_events(two, ts);
	REQUIRE(ev2.size() >= 2);
	CHECK(ev2[0].node == 7);
	CHECK(ev2[1].node == 2);
	for (std::size_t i = 1; i < ev2.size(); ++i) {
		CHECK(std::abs(ev2[i - 1].magnitude) >= std::abs(ev2[i].magnitude));
	}
}

TEST_CASE("batch sampling") {
	auto d = planted(8, 300, 5);
	const auto ts = build_transitions(d.graph);
	SampleOptions o;
	o.batch_size = 40;
	o.repeats = 5;
	o.seed = 9;
	auto a = sample_batches(d.dataset, ts, o);
	auto b = sample_batches(d.dataset, ts, o);
	REQUIRE(a.batches.size() == 5);
	for (std::size_t i = 0; i < 5; ++i) {
		CHECK(a.batches[i].size() <= 40);
		CHECK(a.batches[i].rows.dim(1) == 30);
		CHECK(a.batches[i].rows == b.batches[i].rows);
	}
	o.seed = 10;
	CHECK(sample_batches(d.dataset, ts, o).batches[0].rows != a.batches[0].rows);

	auto flat = scripted(60, {[](double) { return 60.0; }, [](double) { return 50.0; }});
	SensorGraph g2{{"a", "b"}, Tensor::from_rows({{1, 0.5}, {0.5, 1}})};
	SampleOptions e;
	e.mode = SampleSource::Event;
	auto none = sample_batches(flat, build_transitions(g2), e);
	CHECK(none.batches.empty());
	CHECK(!none.warnings.empty());

	auto gappy = d.dataset;
	std::fill(gappy.observed.begin(), gappy.observed.end(), 0);
	auto partial = sample_batches(gappy, ts, o);
	CHECK(partial.batches[0].size() == 0);
	CHECK(partial.warnings.size() == 5);
}

TEST_CASE("pearson examples") {
	std::mt19937_64 rng(52);
	std::normal_distribution<double> z(0.0, 1.0);
	Tensor rows({500, 3});
	for (std::size_t i = 0; i < 500; ++i) {
		rows(i, 0) = z(rng);
		rows(i, 1) = -rows(i, 0);
		rows(i, 2) = 0.5 * rows(i, 0) + z(rng);
	}
	auto c = pearson(rows);
	CHECK(c(0, 0) == 1.0);
	CHECK(std::abs(c(0, 1) + 1.0) < 1e-12);
	std::vector<double> a(500), b(500);
	for (std::size_t i = 0; i < 500; ++i) {
		a[i] = rows(i, 0);
		b[i] = rows(i, 2);
	}
	CHECK(std::abs(c(0, 2) - oracle::pearson(a, b)) < 1e-12);
	CHECK(c(0, 2) == c(2, 0));

	Tensor big({200000, 2});
	for (std::size_t i = 0; i < 200000; ++i) {
		big(i, 0) = z(rng);
		big(i, 1) = z(rng);
	}
	CHECK(std::abs(pearson(big)(0, 1)) < 0.02);

	Tensor flat({10, 2});
	for (std::size_t i = 0; i < 10; ++i) {
		flat(i, 0) = static_cast<double>(i);
		flat(i, 1) = 3.0;
	}
	std::vector<bool> zv;
	auto cf = pearson(flat, &zv);
	CHECK(zv == std::vector<bool>{false, true});
	CHECK(cf(0, 1) == 0.0);
	CHECK(cf(1, 1) == 1.0);
}

TEST_CASE("pearson matrix pools rows and sums batches") {
	auto d = planted(8, 400, 6);
	SampleOptions o;
	o.batch_size = 150;
	o.repeats = 3;
	auto s = sample_batches(d.dataset, build_transitions(d.graph), o);
	auto m = pearson_matrix(s.batches);
	CHECK(m.repeats == 3);
	CHECK(m.kind == RelationKind::Pearson);
	Tensor all({m.rows, 30});
	std::size_t r = 0;
	Tensor sum({30, 30});
	for (const auto& b : s.batches) {
		std::copy(b.rows.data().begin(), b.rows.data().end(), all.data().begin() + r * 30);
		r += b.size();
		auto pb = pearson(b.rows);
		for (std::size_t i = 0; i < 900; ++i) {
			sum[i] += pb[i];
		}
	}
	CHECK(max_abs_diff(m.c, pearson(all)) < 1e-12);
	CHECK(max_abs_diff(m.sum, sum) < 1e-12);
	for (std::size_t i = 0; i < 30; ++i) {
		CHECK(std::abs(m.c(i, i) - 1.0) < 1e-9);
		for (std::size_t j = 0; j < 30; ++j) {
			CHECK(m.c(i, j) == m.c(j, i));
			CHECK(std::abs(m.c(i, j)) <= 1.0);
		}
	}
}

TEST_CASE("link report") {
	RelationMatrix id;
	id.c = Tensor::identity(30);
	auto r = neighbor_link_report(id);
	CHECK(r.triangle_mean == 0.0);
	CHECK(r.second_order_mean == 0.0);
	CHECK(r.self_lag[0] == 0.0);

	auto d = planted(12, 1500, 7);
	SampleOptions o;
	o.batch_size = 1000;
	o.repeats = 4;
	auto m = pearson_matrix(sample_batches(d.dataset, build_transitions(d.graph), o).batches);
	auto rep = neighbor_link_report(m);
	CHECK(rep.triangle_mean > rep.second_order_mean);
	CHECK(rep.self_lag[0] > rep.self_lag[2]);

	auto sw = neighbor_link_report(swap_neighbour_sides(m));
	CHECK(sw.x_i1 == rep.x_o1);
	CHECK(sw.x_o1 == rep.x_i1);
	CHECK(std::abs(sw.triangle_mean - rep.triangle_mean) < 1e-15);
	CHECK(std::abs(sw.second_order_mean - rep.second_order_mean) < 1e-15);
	CHECK(rep.to_json().find("triangle_mean") != std::string::npos);
}

TEST_CASE("distribution summary") {
	std::vector<double> coin;
	for (int i = 0; i < 1000; ++i) {
		coin.push_back(i % 2 ? 1.0 : -1.0);
	}
	auto c = distribution_summary(coin);
	CHECK(std::abs(c.skewness) < 1e-12);
	CHECK(c.mean == 0.0);
	CHECK(c.std == 1.0);

	std::mt19937_64 rng(53);
	std::normal_distribution<double> z(0.0, 1.0);
	std::vector<double> g(100000);
	for (auto& v : g) {
		v = z(rng);
	}
	auto n = distribution_summary(g, 40);
	CHECK(std::abs(n.skewness) < 0.05);
	CHECK(std::abs(n.excess_kurtosis) < 0.1);
	CHECK(n.counts.size() == 40);
	CHECK(n.bin_edges.size() == 41);
	std::size_t total = 0;
	for (auto k : n.counts) {
		total += k;
	}
	CHECK(total == 100000);

	auto k = distribution_summary(std::vector<double>(7, 3.5));
	CHECK(k.std == 0.0);
	CHECK(k.counts == std::vector<std::size_t>{7});
}

TEST_CASE("file exchange with an external discovery program") {
	auto dir = helpers::scratch_dir("causal_io");
	auto d = planted(6, 300, 8);
	SampleOptions o;
	o.batch_size = 60;
	o.repeats = 3;
	auto batches = sample_batches(d.dataset, build_transitions(d.graph), o).batches;
	export_batches((dir / "batches").string(), batches);
	auto back = import_batches((dir / "batches").string());
	REQUIRE(back.size() == 3);
	for (std::size_t i = 0; i < 3; ++i) {
		CHECK(back[i].rows == batches[i].rows);
	}

	auto m = pearson_matrix(batches);
	const auto rel = (dir / "rel.csv").string();
	write_relation_csv(rel, m);
	auto imported = import_relation(rel);
	CHECK(imported.kind == RelationKind::ExternalIcd);
	CHECK(max_abs_diff(imported.c, m.c) < 1e-12);

	auto lines = csv::read_lines(rel);
	std::string short_row;
	for (std::size_t i = 0; i < lines.size(); ++i) {
		short_row += (i == 3 ? lines[i].substr(0, lines[i].rfind(',')) : lines[i]) + "\n";
	}
	csv::write_text((dir / "short.csv").string(), short_row);
	CHECK_THROWS_AS(import_relation((dir / "short.csv").string()), InputError);

	std::string renamed;
	for (std::size_t i = 0; i < lines.size(); ++i) {
		std::string l = lines[i];
		if (i == 0) {
			l.replace(l.find("I1(t)"), 5, "O1(t)");
		}
		renamed += l + "\n";
	}
	csv::write_text((dir / "renamed.csv").string(), renamed);
	CHECK_THROWS_AS(import_relation((dir / "renamed.csv").string()), InputError);
}
