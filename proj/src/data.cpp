#include "gtcausin/data.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "gtcausin/csv.hpp"
#include "gtcausin/error.hpp"
#include "gtcausin/layers.hpp"

namespace gtc {

namespace chr = std::chrono;

Timestamp parse_timestamp(const std::string& s) {
	int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
	char sep = 0;
	int consumed = 0;
	const int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &se, &consumed);
	if (n != 7 || (sep != ' ' && sep != 'T')) {
		throw InputError("bad timestamp '" + s + "'");
	}
	const std::string rest = s.substr(static_cast<std::size_t>(consumed));
	if (!rest.empty() && rest != "Z") {
		throw InputError("bad timestamp '" + s + "'");
	}
	const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
	                              chr::day{static_cast<unsigned>(d)}};
	if (!ymd.ok() || h > 23 || mi > 59 || se > 59) {
		throw InputError("bad timestamp '" + s + "'");
	}
	const auto days = chr::sys_days{ymd}.time_since_epoch().count();
	return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_timestamp(Timestamp ts) {
	const auto day_index = static_cast<int>(std::floor(static_cast<double>(ts) / 86400.0));
	const Timestamp secs = ts - static_cast<Timestamp>(day_index) * 86400;
	const chr::year_month_day ymd{chr::sys_days{chr::days{day_index}}};
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
	              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
	              static_cast<int>(secs / 3600), static_cast<int>((secs / 60) % 60), static_cast<int>(secs % 60));
	return buf;
}

int day_of_week(Timestamp ts) {
	const auto day_index = static_cast<long>(std::floor(static_cast<double>(ts) / 86400.0));
	const chr::weekday wd{chr::sys_days{chr::days{day_index}}};
	// iso_encoding: Monday = 1 ... Sunday = 7
	return static_cast<int>(wd.iso_encoding()) - 1;
}

int month_of_year(Timestamp ts) {
	const auto day_index = static_cast<long>(std::floor(static_cast<double>(ts) / 86400.0));
	const chr::year_month_day ymd{chr::sys_days{chr::days{day_index}}};
	return static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
}

bool is_weekend(Timestamp ts) {
	return day_of_week(ts) >= 5;
}

const char* to_string(SplitKind s) {
	switch (s) {
	case SplitKind::Train: return "train";
	case SplitKind::Val: return "val";
	case SplitKind::Test: return "test";
	}
	return "?";
}

SplitKind parse_split(const std::string& s) {
	if (s == "train") {
		return SplitKind::Train;
	}
	if (s == "val" || s == "validation") {
		return SplitKind::Val;
	}
	if (s == "test") {
		return SplitKind::Test;
	}
	throw InputError("unknown split '" + s + "' (expected train, val or test)");
}

std::pair<std::size_t, std::size_t> SpeedDataset::range(SplitKind s) const {
	switch (s) {
	case SplitKind::Train: return {0, split.train_end};
	case SplitKind::Val: return {split.train_end, split.val_end};
	case SplitKind::Test: return {split.val_end, steps()};
	}
	return {0, 0};
}

std::int64_t SpeedDataset::spacing() const {
	return steps() < 2 ? 0 : timestamps[1] - timestamps[0];
}

SpeedDataset parse_speed_csv(const std::vector<std::string>& lines, const LoadOptions& opts) {
	if (lines.empty()) {
		throw InputError("speed file is empty");
	}
	const auto header = csv::split(lines[0]);
	if (header.size() < 2) {
		throw InputError("speed file header needs a timestamp column and at least one sensor");
	}
	SpeedDataset ds;
	ds.unit = opts.unit;
	ds.zero_is_missing = opts.zero_is_missing;
	ds.node_ids.assign(header.begin() + 1, header.end());
	const std::size_t n = ds.node_ids.size();
	std::vector<double> values;
	values.reserve((lines.size() - 1) * n);
	ds.observed.reserve((lines.size() - 1) * n);
	for (std::size_t li = 1; li < lines.size(); ++li) {
		const auto f = csv::split(lines[li]);
		if (f.size() != n + 1) {
			throw InputError("speed file line " + std::to_string(li + 1) + ": expected " + std::to_string(n + 1) +
			                 " fields, got " + std::to_string(f.size()));
		}
		const Timestamp ts = parse_timestamp(f[0]);
		if (!ds.timestamps.empty()) {
			if (ts == ds.timestamps.back()) {
				throw InputError("duplicate timestamp " + f[0]);
			}
			if (ts < ds.timestamps.back()) {
				throw InputError("timestamps are not increasing at line " + std::to_string(li + 1));
			}
		}
		ds.timestamps.push_back(ts);
		for (std::size_t j = 0; j < n; ++j) {
			const std::string& cell = f[j + 1];
			if (cell.empty()) {
				values.push_back(0.0);
				ds.observed.push_back(0);
				continue;
			}
			const auto v = csv::parse_double(cell);
			if (!v) {
				throw InputError("speed file line " + std::to_string(li + 1) + ": bad value '" + cell + "'");
			}
			if (!std::isfinite(*v) || (opts.zero_is_missing && *v == 0.0)) {
				values.push_back(0.0);
				ds.observed.push_back(0);
			} else {
				values.push_back(*v);
				ds.observed.push_back(1);
			}
		}
	}
	ds.speeds = Tensor({ds.timestamps.size(), n}, std::move(values));
	return ds;
}

SpeedDataset load_speed_csv(const std::string& path, const LoadOptions& opts) {
	return parse_speed_csv(csv::read_lines(path), opts);
}

void save_speed_csv(const std::string& path, const SpeedDataset& ds) {
	std::ostringstream os;
	os << "timestamp";
	for (const auto& id : ds.node_ids) {
		os << ',' << id;
	}
	os << '\n';
	for (std::size_t t = 0; t < ds.steps(); ++t) {
		os << format_timestamp(ds.timestamps[t]);
		for (std::size_t j = 0; j < ds.nodes(); ++j) {
			os << ',';
			if (ds.is_observed(t, j)) {
				os << csv::format_double(ds.speed(t, j));
			}
		}
		os << '\n';
	}
	csv::write_text(path, os.str());
}

SpeedDataset aggregate_5min(const SpeedDataset& ds) {
	constexpr std::int64_t kWindow = 300;
	if (ds.steps() < 2) {
		return ds;
	}
	const std::int64_t dt = ds.spacing();
	for (std::size_t t = 1; t < ds.steps(); ++t) {
		if (ds.timestamps[t] - ds.timestamps[t - 1] != dt) {
			throw InputError("irregular raw sampling interval at " + format_timestamp(ds.timestamps[t]));
		}
	}
	if (dt <= 0 || kWindow % dt != 0) {
		throw InputError("raw sampling interval of " + std::to_string(dt) + " s does not divide 5 minutes");
	}
	if (dt == kWindow && ds.timestamps[0] % kWindow == 0) {
		return ds;
	}
	auto window_of = [](Timestamp ts) {
		return static_cast<Timestamp>(std::floor(static_cast<double>(ts) / kWindow)) * kWindow;
	};
	const Timestamp first = window_of(ds.timestamps.front());
	const Timestamp last = window_of(ds.timestamps.back());
	const std::size_t windows = static_cast<std::size_t>((last - first) / kWindow) + 1;
	const std::size_t n = ds.nodes();
	std::vector<double> sum(windows * n, 0.0);
	std::vector<std::size_t> count(windows * n, 0);
	for (std::size_t t = 0; t < ds.steps(); ++t) {
		const auto w = static_cast<std::size_t>((window_of(ds.timestamps[t]) - first) / kWindow);
		for (std::size_t j = 0; j < n; ++j) {
			if (ds.is_observed(t, j)) {
				sum[w * n + j] += ds.speed(t, j);
				++count[w * n + j];
			}
		}
	}
	SpeedDataset out;
	out.node_ids = ds.node_ids;
	out.unit = ds.unit;
	out.zero_is_missing = ds.zero_is_missing;
	out.speeds = Tensor({windows, n});
	out.observed.assign(windows * n, 0);
	for (std::size_t w = 0; w < windows; ++w) {
		out.timestamps.push_back(first + static_cast<Timestamp>(w) * kWindow);
		for (std::size_t j = 0; j < n; ++j) {
			if (count[w * n + j] > 0) {
				out.speeds(w, j) = sum[w * n + j] / static_cast<double>(count[w * n + j]);
				out.observed[w * n + j] = 1;
			}
		}
	}
	return out;
}

SplitIndices chronological_split(std::size_t steps) {
	SplitIndices s;
	s.train_end = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(steps)));
	s.val_end = static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(steps)));
	return s;
}

NormStats compute_norm_stats(const SpeedDataset& ds) {
	const auto [a, b] = ds.range(SplitKind::Train);
	double sum = 0.0;
	std::size_t count = 0;
	for (std::size_t t = a; t < b; ++t) {
		for (std::size_t j = 0; j < ds.nodes(); ++j) {
			if (ds.is_observed(t, j)) {
				sum += ds.speed(t, j);
				++count;
			}
		}
	}
	if (count == 0) {
		throw DataError("training split has no observed readings");
	}
	const double mean = sum / static_cast<double>(count);
	double ss = 0.0;
	for (std::size_t t = a; t < b; ++t) {
		for (std::size_t j = 0; j < ds.nodes(); ++j) {
			if (ds.is_observed(t, j)) {
				const double d = ds.speed(t, j) - mean;
				ss += d * d;
			}
		}
	}
	const double sd = std::sqrt(ss / static_cast<double>(count));
	if (!(sd > 0.0)) {
		throw DataError("training split has zero variance; cannot normalise");
	}
	return {mean, sd};
}

void prepare_splits(SpeedDataset& ds) {
	ds.split = chronological_split(ds.steps());
	ds.norm = compute_norm_stats(ds);
}

DenseView interpolate_training(const SpeedDataset& ds) {
	DenseView view;
	view.speeds = ds.speeds;
	const std::size_t n = ds.nodes();
	std::vector<std::size_t> total(n, 0);
	for (std::size_t t = 0; t < ds.steps(); ++t) {
		for (std::size_t j = 0; j < n; ++j) {
			total[j] += ds.is_observed(t, j) ? 1 : 0;
		}
	}
	for (std::size_t j = 0; j < n; ++j) {
		if (total[j] == 0) {
			view.rejected_sensors.push_back(j);
			view.warnings.push_back("sensor " + ds.node_ids[j] + " has no observations; rejected");
		}
	}
	for (auto split : {SplitKind::Train, SplitKind::Val, SplitKind::Test}) {
		const auto [a, b] = ds.range(split);
		if (a >= b) {
			continue;
		}
		for (std::size_t j = 0; j < n; ++j) {
			std::size_t prev = b;  // last observed index, b = none yet
			for (std::size_t t = a; t < b; ++t) {
				if (!ds.is_observed(t, j)) {
					continue;
				}
				if (prev == b) {
					for (std::size_t u = a; u < t; ++u) {
						view.speeds(u, j) = ds.speed(t, j);
					}
				} else if (t > prev + 1) {
					const double y0 = ds.speed(prev, j);
					const double y1 = ds.speed(t, j);
					const double span = static_cast<double>(t - prev);
					for (std::size_t u = prev + 1; u < t; ++u) {
						view.speeds(u, j) = y0 + (y1 - y0) * static_cast<double>(u - prev) / span;
					}
				}
				prev = t;
			}
			if (prev == b) {
				for (std::size_t u = a; u < b; ++u) {
					view.speeds(u, j) = ds.norm.mean;
				}
				if (total[j] > 0) {
					view.warnings.push_back("sensor " + ds.node_ids[j] + " has no observations in the " +
					                        to_string(split) + " split; filled with the training mean");
				}
			} else {
				for (std::size_t u = prev + 1; u < b; ++u) {
					view.speeds(u, j) = ds.speed(prev, j);
				}
			}
		}
	}
	return view;
}

Window make_window(const SpeedDataset& ds, const DenseView& dense, std::size_t start, std::size_t input_len,
                   std::size_t output_len) {
	require(input_len >= 1 && output_len >= 1, "window lengths must be positive");
	if (start + input_len + output_len > ds.steps()) {
		throw InputError("window starting at step " + std::to_string(start) + " runs past the end of the data (" +
		                 std::to_string(ds.steps()) + " steps)");
	}
	const std::size_t n = ds.nodes();
	Window w;
	w.start = start;
	w.input = Tensor({n, 1, input_len});
	w.target = Tensor({n, 1, output_len});
	w.target_mask = Tensor({n, 1, output_len});
	for (std::size_t j = 0; j < n; ++j) {
		for (std::size_t k = 0; k < input_len; ++k) {
			w.input(j, 0, k) = (dense.speeds(start + k, j) - ds.norm.mean) / ds.norm.std;
		}
		for (std::size_t k = 0; k < output_len; ++k) {
			const std::size_t t = start + input_len + k;
			if (ds.is_observed(t, j)) {
				w.target(j, 0, k) = ds.speed(t, j);
				w.target_mask(j, 0, k) = 1.0;
			}
		}
	}
	w.calendar = make_calendar(ds, start + input_len);
	return w;
}

std::vector<Window> make_windows(const SpeedDataset& ds, const DenseView& dense, SplitKind split,
                                 std::size_t input_len, std::size_t output_len, std::vector<std::string>* warnings) {
	const auto [a, b] = ds.range(split);
	const std::size_t span = input_len + output_len;
	std::vector<Window> out;
	if (b < a + span) {
		if (warnings) {
			warnings->push_back(std::string(to_string(split)) + " split has " + std::to_string(b - a) +
			                    " steps, fewer than the " + std::to_string(span) + " a window needs");
		}
		return out;
	}
	out.reserve(b - a - span + 1);
	for (std::size_t s = a; s + span <= b; ++s) {
		out.push_back(make_window(ds, dense, s, input_len, output_len));
	}
	return out;
}

} // namespace gtc
