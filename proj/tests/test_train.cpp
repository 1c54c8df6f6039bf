#include <doctest.h>

#include <cmath>
#include <random>

#include "gtcausin/error.hpp"
#include "gtcausin/synthetic.hpp"
#include "gtcausin/train.hpp"
#include "oracles.hpp"

using namespace gtc;

namespace {

SyntheticData planted(std::size_t nodes, std::size_t steps, std::uint64_t seed, double missing = 0.0) {
	SyntheticGraphOptions g;
	g.nodes = nodes;
	g.seed = seed;
	PlantedOptions p;
	p.steps = steps;
	p.seed = seed;
	p.missing_rate = missing;
	auto d = make_planted(g, p);
	prepare_splits(d.dataset);
	return d;
}

void random_masked(std::mt19937_64& rng, Tensor& pred, Tensor& truth, Tensor& mask) {
	std::uniform_real_distribution<double> u(0.0, 80.0);
	std::bernoulli_distribution keep(0.7), zero(0.05);
	for (std::size_t i = 0; i < pred.size(); ++i) {
		pred[i] = u(rng);
		truth[i] = zero(rng) ? 0.0 : u(rng);
		mask[i] = keep(rng) ? 1.0 : 0.0;
	}
	mask[0] = 1.0;
}

} // namespace

TEST_CASE("metric examples") {
	Tensor a({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
	Tensor ones({2, 3}, 1.0);
	auto same = masked_metrics(a, a, ones);
	CHECK(same.mae == 0.0);
	CHECK(same.rmse == 0.0);
	CHECK(same.mape == 0.0);
	CHECK(same.count == 6);

	Tensor truth({2}, std::vector<double>{60, 0}), pred({2}, std::vector<double>{63, 99}), mask({2}, std::vector<double>{1, 0});
	auto m = masked_metrics(pred, truth, mask);
	CHECK(m.mae == 3.0);
	CHECK(m.rmse == 3.0);
	CHECK(m.mape == doctest::Approx(0.05).epsilon(1e-15));
	CHECK(m.count == 1);

	std::size_t skipped = 0;
	Tensor t2({2}, std::vector<double>{0, 50}), p2({2}, std::vector<double>{1, 55});
	CHECK(masked_mape(p2, t2, Tensor({2}, 1.0), &skipped) == doctest::Approx(0.1));
	CHECK(skipped == 1);
	CHECK_THROWS_AS(masked_mae(a, a, Tensor({2, 3})), DataError);
	CHECK_THROWS_AS(masked_mae(a, Tensor({3, 2}), ones), InputError);
}

TEST_CASE("metrics match brute-force loops and ignore masked entries") {
	std::mt19937_64 rng(61);
	for (int trial = 0; trial < 200; ++trial) {
		Tensor pred({5, 5}), truth({5, 5}), mask({5, 5});
		random_masked(rng, pred, truth, mask);
		auto m = masked_metrics(pred, truth, mask);
		auto o = oracle::masked_metrics(pred, truth, mask);
		CHECK(std::abs(m.mae - o.mae) < 1e-12);
		CHECK(std::abs(m.rmse - o.rmse) < 1e-12);
		CHECK(std::abs(m.mape - o.mape) < 1e-12);
		CHECK(m.rmse >= m.mae);
		for (std::size_t i = 0; i < pred.size(); ++i) {
			if (mask[i] == 0.0) {
				truth[i] = 1e6;
				pred[i] = -3.0;
			}
		}
		auto c = masked_metrics(pred, truth, mask);
		CHECK(c.mae == m.mae);
		CHECK(c.rmse == m.rmse);
		CHECK(c.mape == m.mape);
	}
}

TEST_CASE("improvement arithmetic") {
	CHECK(std::round(improvement(3.18, 3.06) * 1000.0) / 10.0 == 3.8);
	CHECK(improvement(2.0, 2.0) == 0.0);
	CHECK(improvement(2.0, 2.5) < 0.0);
}

TEST_CASE("zero epochs return the initial parameters") {
	auto d = planted(5, 300, 1);
	Model m(ModelConfig{}, d.graph, d.dataset.norm);
	const ParamStore before = m.params();
	TrainOptions o;
	o.epochs = 0;
	auto r = train(m, d.dataset, o);
	CHECK(r.curve.empty());
	CHECK(r.best_epoch == 0);
	CHECK(m.params() == before);
}

TEST_CASE("training is deterministic for a fixed seed") {
	auto d = planted(5, 300, 2, 0.05);
	auto run = [&](std::uint64_t seed) {
		ModelConfig c;
		c.seed = seed;
		Model m(c, d.graph, d.dataset.norm);
		TrainOptions o;
		o.epochs = 2;
		o.seed = seed;
		auto r = train(m, d.dataset, o);
		return std::make_pair(loss_curve_csv(r.curve), m.params());
	};
	auto a = run(3), b = run(3), c = run(4);
	CHECK(a.first == b.first);
	CHECK(a.second == b.second);
	CHECK(a.first != c.first);
	CHECK(a.first.rfind("epoch,train_mae,val_mae,lr\n", 0) == 0);
}

TEST_CASE("training loss matches the masked metric path") {
	auto d = planted(5, 300, 3, 0.1);
	Model m(ModelConfig{}, d.graph, d.dataset.norm);
	auto dense = interpolate_training(d.dataset);
	auto windows = make_windows(d.dataset, dense, SplitKind::Train);
	const Window& w = windows[7];
	Tape t;
	Var y = m.forward(t, w.input, w.calendar);
	Var loss = ops::masked_abs_sum(t, y, w.target, w.target_mask);
	double count = 0.0;
	for (double v : w.target_mask.data()) {
		count += v;
	}
	CHECK(std::abs(t.value(loss)[0] / count - masked_mae(t.value(y), w.target, w.target_mask)) < 1e-12);
	CHECK(std::abs(split_mae(m, {w}) - masked_mae(t.value(y), w.target, w.target_mask)) < 1e-12);
}

TEST_CASE("smoke run on a 20-node synthetic dataset") {
	auto d = planted(20, 600, 4);
	Model m(ModelConfig{}, d.graph, d.dataset.norm);
	TrainOptions o;
	o.epochs = 5;
	auto r = train(m, d.dataset, o);
	REQUIRE(r.curve.size() == 5);
	for (std::size_t e = 1; e < 5; ++e) {
		CHECK(r.curve[e].train_mae <= r.curve[e - 1].train_mae * 1.02);
	}
	CHECK(r.curve[4].train_mae < r.curve[0].train_mae);
	CHECK(r.curve[0].lr == 0.004);
}

TEST_CASE("keep_best and stop_when") {
	auto d = planted(5, 300, 5);
	Model m(ModelConfig{}, d.graph, d.dataset.norm);
	TrainOptions o;
	o.epochs = 10;
	o.keep_best = false;
	o.stop_when = [](const EpochRecord& r) { return r.epoch == 2; };
	auto r = train(m, d.dataset, o);
	CHECK(r.epochs_run == 2);
	CHECK(r.stopped_early);
	CHECK(std::abs(split_mae(m, make_windows(d.dataset, interpolate_training(d.dataset), SplitKind::Val)) -
	               r.curve.back().val_mae) < 1e-12);
}

TEST_CASE("evaluation report") {
	auto d = planted(6, 400, 6, 0.1);
	Model m(ModelConfig{}, d.graph, d.dataset.norm);
	auto rep = evaluate(m, d.dataset, SplitKind::Test);
	REQUIRE(rep.horizons.size() == 3);
	CHECK(rep.horizons[0].minutes == 15);
	CHECK(rep.horizons[1].minutes == 30);
	CHECK(rep.horizons[2].minutes == 60);
	auto dense = interpolate_training(d.dataset);
	auto windows = make_windows(d.dataset, dense, SplitKind::Test);
	CHECK(rep.windows == windows.size());
	for (const auto& h : rep.horizons) {
		std::size_t observed = 0;
		for (const auto& w : windows) {
			for (std::size_t j = 0; j < 6; ++j) {
				observed += w.target_mask(j, 0, h.steps - 1) != 0.0 ? 1 : 0;
			}
		}
		CHECK(h.metrics.count == observed);
		CHECK(h.metrics.rmse >= h.metrics.mae);
	}
	CHECK(rep.at_minutes(60).steps == 12);
	CHECK(rep.config_digest.size() == 64);
	CHECK(rep.to_json().find("\"mape\"") != std::string::npos);
	auto shifted = d.dataset;
	shifted.norm.mean += 1.0;
	CHECK_THROWS_AS(evaluate(m, shifted, SplitKind::Test), InputError);
}

TEST_CASE("ablation table") {
	auto d = planted(5, 300, 7);
	ModelConfig a;
	a.num_blocks = 3;
	TrainOptions o;
	o.epochs = 1;
	auto t = ablation_run({a, a}, d.graph, d.dataset, {1, 2}, o);
	REQUIRE(t.rows.size() == 2);
	CHECK(t.rows[0].runs.size() == 2);
	CHECK(t.rows[0].label == "gt-causin L=3");
	CHECK(t.mae_improvement(0, 1, 60) == 0.0);
	const double mean = (t.rows[0].runs[0].at_minutes(60).metrics.mae + t.rows[0].runs[1].at_minutes(60).metrics.mae) / 2.0;
	CHECK(std::abs(t.mean_mae(0, 60) - mean) < 1e-12);
	auto csv = t.to_csv();
	CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3);
	CHECK(t.to_json().find("mae_improvement_over") != std::string::npos);
}
