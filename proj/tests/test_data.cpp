#include <doctest.h>

#include <cmath>
#include <random>

#include "gtcausin/csv.hpp"
#include "gtcausin/data.hpp"
#include "gtcausin/error.hpp"
#include "helpers.hpp"

using namespace gtc;

namespace {

constexpr Timestamp kMonday = 1704067200;

// One sensor column per vector entry; NAN marks a missing reading.
SpeedDataset series(const std::vector<std::vector<double>>& rows, std::int64_t spacing = 300) {
	SpeedDataset ds;
	const std::size_t n = rows.front().size();
	for (std::size_t j = 0; j < n; ++j) {
		ds.node_ids.push_back("s" + std::to_string(j));
	}
	ds.speeds = Tensor({rows.size(), n});
	ds.observed.assign(rows.size() * n, 0);
	for (std::size_t t = 0; t < rows.size(); ++t) {
		ds.timestamps.push_back(kMonday + static_cast<Timestamp>(t) * spacing);
		for (std::size_t j = 0; j < n; ++j) {
			if (!std::isnan(rows[t][j])) {
				ds.speeds(t, j) = rows[t][j];
				ds.observed[t * n + j] = 1;
			}
		}
	}
	return ds;
}

SpeedDataset ramp(std::size_t steps, std::size_t nodes = 2) {
	std::vector<std::vector<double>> rows(steps, std::vector<double>(nodes));
	for (std::size_t t = 0; t < steps; ++t) {
		for (std::size_t j = 0; j < nodes; ++j) {
			rows[t][j] = 50.0 + static_cast<double>(t) + 3.0 * static_cast<double>(j);
		}
	}
	return series(rows);
}

} // namespace

TEST_CASE("timestamps and calendar conventions") {
	CHECK(parse_timestamp("2024-01-01 00:00:00") == kMonday);
	CHECK(parse_timestamp("2024-01-01T00:05:00Z") == kMonday + 300);
	CHECK(format_timestamp(kMonday) == "2024-01-01 00:00:00");
	CHECK(day_of_week(kMonday) == 0);
	CHECK(day_of_week(kMonday + 6 * 86400) == 6);
	CHECK(is_weekend(kMonday + 5 * 86400));
	CHECK(!is_weekend(kMonday + 4 * 86400));
	CHECK(month_of_year(kMonday) == 0);
	CHECK(month_of_year(parse_timestamp("2024-12-31 23:59:59")) == 11);
	CHECK_THROWS_AS(parse_timestamp("yesterday"), InputError);
}

TEST_CASE("speed csv parsing") {
	auto ds = parse_speed_csv({"timestamp,a,b", "2024-01-01 00:00:00,60.5,", "2024-01-01 00:05:00,0,61"});
	CHECK(ds.nodes() == 2);
	CHECK(ds.steps() == 2);
	CHECK(ds.is_observed(0, 0));
	CHECK(!ds.is_observed(0, 1));
	CHECK(!ds.is_observed(1, 0));
	auto keep = parse_speed_csv({"timestamp,a", "2024-01-01 00:00:00,0"}, {false, "mph"});
	CHECK(keep.is_observed(0, 0));
	CHECK(keep.unit == "mph");
	CHECK_THROWS_AS(parse_speed_csv({"timestamp,a", "2024-01-01 00:05:00,1", "2024-01-01 00:00:00,2"}), InputError);
	CHECK_THROWS_AS(parse_speed_csv({"timestamp,a", "2024-01-01 00:05:00,1", "2024-01-01 00:05:00,2"}), InputError);
	CHECK_THROWS_AS(parse_speed_csv({"timestamp,a,b", "2024-01-01 00:05:00,1"}), InputError);
	CHECK_THROWS_AS(parse_speed_csv({"timestamp,a", "2024-01-01 00:05:00,fast"}), InputError);
}

TEST_CASE("speed csv round trips bit-exactly") {
	auto dir = helpers::scratch_dir("data_csv");
	auto ds = series({{60.1, 1.0 / 3.0}, {NAN, 55.25}, {58.0, 1e-7}});
	const auto path = (dir / "s.csv").string();
	save_speed_csv(path, ds);
	auto back = load_speed_csv(path);
	CHECK(back.timestamps == ds.timestamps);
	CHECK(back.node_ids == ds.node_ids);
	CHECK(back.speeds == ds.speeds);
	CHECK(back.observed == ds.observed);
}

TEST_CASE("five-minute aggregation") {
	auto five = series({{50}, {52}, {54}});
	auto same = aggregate_5min(five);
	CHECK(same.speeds == five.speeds);
	CHECK(same.timestamps == five.timestamps);

	auto minute = series({{50}, {52}, {54}, {56}, {58}, {NAN}, {NAN}, {NAN}, {NAN}, {NAN}, {70}}, 60);
	auto agg = aggregate_5min(minute);
	REQUIRE(agg.steps() == 3);
	CHECK(agg.speeds(0, 0) == 54.0);
	CHECK(!agg.is_observed(1, 0));
	CHECK(agg.speeds(2, 0) == 70.0);
	CHECK(agg.timestamps[1] == kMonday + 300);

	auto odd = series({{1}, {2}}, 420);
	CHECK_THROWS_AS(aggregate_5min(odd), InputError);
	auto irregular = series({{1}, {2}, {3}}, 60);
	irregular.timestamps[2] += 60;
	CHECK_THROWS_AS(aggregate_5min(irregular), InputError);
}

TEST_CASE("split and normalisation") {
	auto s = chronological_split(100);
	CHECK(s.train_end == 80);
	CHECK(s.val_end == 90);
	auto ds = ramp(200);
	ds.observed[5 * 2 + 1] = 0;
	prepare_splits(ds);
	const auto [a, b] = ds.range(SplitKind::Train);
	double sum = 0.0;
	std::size_t n = 0;
	for (std::size_t t = a; t < b; ++t) {
		for (std::size_t j = 0; j < 2; ++j) {
			if (ds.is_observed(t, j)) {
				sum += (ds.speed(t, j) - ds.norm.mean) / ds.norm.std;
				++n;
			}
		}
	}
	CHECK(std::abs(sum / static_cast<double>(n)) < 1e-9);
	auto flat = series(std::vector<std::vector<double>>(10, {60.0}));
	flat.split = chronological_split(10);
	CHECK_THROWS_AS(compute_norm_stats(flat), DataError);
}

TEST_CASE("interpolation examples") {
	auto mid = series({{60}, {NAN}, {70}});
	mid.norm = {65.0, 1.0};
	CHECK(interpolate_training(mid).speeds(1, 0) == 65.0);
	auto lead = series({{NAN}, {60}});
	CHECK(interpolate_training(lead).speeds(0, 0) == 60.0);
	auto gap = series({{60}, {NAN}, {NAN}, {NAN}, {72}});
	auto g = interpolate_training(gap).speeds;
	CHECK(g(1, 0) == doctest::Approx(63.0).epsilon(1e-15));
	CHECK(g(2, 0) == doctest::Approx(66.0).epsilon(1e-15));
	CHECK(g(3, 0) == doctest::Approx(69.0).epsilon(1e-15));
	auto dead = series({{60, NAN}, {61, NAN}});
	auto dv = interpolate_training(dead);
	CHECK(dv.rejected_sensors == std::vector<std::size_t>{1});
	CHECK(!dv.warnings.empty());
}

TEST_CASE("interpolation is idempotent, keeps observations and respects splits") {
	std::mt19937_64 rng(21);
	std::bernoulli_distribution miss(0.3);
	auto ds = ramp(120, 3);
	for (auto& o : ds.observed) {
		o = miss(rng) ? 0 : 1;
	}
	for (std::size_t t = 0; t < 3; ++t) {
		ds.observed[t * 3] = 1;
	}
	for (std::size_t t = 0; t < ds.steps(); ++t) {
		for (std::size_t j = 0; j < 3; ++j) {
			if (!ds.is_observed(t, j)) {
				ds.speeds(t, j) = 0.0;
			}
		}
	}
	prepare_splits(ds);
	auto once = interpolate_training(ds);
	auto full = ds;
	full.speeds = once.speeds;
	std::fill(full.observed.begin(), full.observed.end(), 1);
	CHECK(interpolate_training(full).speeds == once.speeds);
	for (std::size_t t = 0; t < ds.steps(); ++t) {
		for (std::size_t j = 0; j < 3; ++j) {
			if (ds.is_observed(t, j)) {
				CHECK(once.speeds(t, j) == ds.speed(t, j));
			}
		}
	}
	// A missing first validation step must not borrow the last training value.
	auto cut = ramp(100, 1);
	prepare_splits(cut);
	cut.observed[80] = 0;
	cut.speeds(80, 0) = 0.0;
	CHECK(interpolate_training(cut).speeds(80, 0) == cut.speed(81, 0));
}

TEST_CASE("window counts and masks") {
	auto ds = ramp(24 + 30 + 10);
	ds.split = {24, 54};
	ds.norm = {60.0, 2.0};
	ds.observed[18 * 2 + 1] = 0;
	ds.speeds(18, 1) = 0.0;
	auto dense = interpolate_training(ds);
	CHECK(make_windows(ds, dense, SplitKind::Train).size() == 1);
	auto val = make_windows(ds, dense, SplitKind::Val);
	CHECK(val.size() == 7);
	std::vector<std::string> warn;
	CHECK(make_windows(ds, dense, SplitKind::Test, 12, 12, &warn).empty());
	CHECK(warn.size() == 1);
	const auto w = make_windows(ds, dense, SplitKind::Train)[0];
	CHECK(w.input.shape() == Shape{2, 1, 12});
	CHECK(w.input(0, 0, 3) == (ds.speed(3, 0) - 60.0) / 2.0);
	CHECK(w.target(1, 0, 6) == 0.0);
	CHECK(w.target_mask(1, 0, 6) == 0.0);
	CHECK(w.target_mask(0, 0, 6) == 1.0);
	CHECK(w.target(0, 0, 0) == ds.speed(12, 0));
	for (const auto& v : val) {
		CHECK(v.start >= 24);
		CHECK(v.start + 24 <= 54);
	}
	CHECK_THROWS_AS(make_window(ds, dense, 50), InputError);
}

TEST_CASE("csv helpers") {
	CHECK(csv::split("a,,b") == std::vector<std::string>{"a", "", "b"});
	CHECK(csv::join({"x", "y"}) == "x,y");
	CHECK(!csv::parse_double("abc").has_value());
	CHECK(csv::parse_double("-1.5e3").value() == -1500.0);
	for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) {
		CHECK(csv::parse_double(csv::format_double(v)).value() == v);
	}
}
