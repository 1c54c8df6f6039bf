#include "gtcausin/causal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gtcausin/csv.hpp"
#include "gtcausin/error.hpp"
#include "gtcausin/kernels.hpp"

namespace gtc {

namespace fs = std::filesystem;

const std::vector<std::string>& causal_variable_names() {
	static const std::vector<std::string> names = [] {
		const char* per[] = {"X", "I1", "O1", "I2", "O2"};
		std::vector<std::string> out;
		for (std::size_t s = 0; s < kCausalSlices; ++s) {
			for (const char* p : per) {
				out.push_back(std::string(p) + (s == 0 ? "(t)" : "(t+" + std::to_string(s) + ")"));
			}
		}
		return out;
	}();
	return names;
}

std::vector<double> speed_variation(std::span<const double> series) {
	require(series.size() >= 2, "speed_variation needs at least two readings");
	std::vector<double> out(series.size() - 1);
	for (std::size_t t = 0; t + 1 < series.size(); ++t) {
		out[t] = series[t + 1] - series[t];
	}
	return out;
}

namespace {

const Tensor* perspective_matrix(const TransitionSet& ts, std::size_t k) {
	switch (k) {
	case 1: return &ts.t_i1;
	case 2: return &ts.t_o1;
	case 3: return &ts.t_i2;
	case 4: return &ts.t_o2;
	}
	return nullptr;
}

// Value of perspective k for `node` at time t (caller checks observation).
double perspective_value(const SpeedDataset& ds, const TransitionSet& ts, std::size_t k, std::size_t node,
                         std::size_t t) {
	if (k == 0) {
		return ds.speed(t, node);
	}
	const Tensor& m = *perspective_matrix(ts, k);
	double v = 0.0;
	for (std::size_t j = 0; j < ds.nodes(); ++j) {
		const double w = m(node, j);
		if (w != 0.0) {
			v += w * ds.speed(t, j);
		}
	}
	return v;
}

std::vector<std::size_t> neighborhood(const TransitionSet& ts, std::size_t node, std::size_t n, std::size_t depth) {
	std::vector<std::size_t> out{node};
	for (std::size_t k = 1; k <= depth; ++k) {
		const Tensor& m = *perspective_matrix(ts, k);
		for (std::size_t j = 0; j < n; ++j) {
			if (m(node, j) != 0.0 && std::find(out.begin(), out.end(), j) == out.end()) {
				out.push_back(j);
			}
		}
	}
	return out;
}

bool span_observed(const SpeedDataset& ds, const std::vector<std::size_t>& nodes, std::size_t t0, std::size_t t1) {
	for (std::size_t t = t0; t <= t1; ++t) {
		for (auto j : nodes) {
			if (!ds.is_observed(t, j)) {
				return false;
			}
		}
	}
	return true;
}

void check_graph(const SpeedDataset& ds, const TransitionSet& ts) {
	if (ts.t_i1.rank() != 2 || ts.t_i1.dim(0) != ds.nodes()) {
		throw InputError("transition matrices do not match the dataset's " + std::to_string(ds.nodes()) + " sensors");
	}
}

} // namespace

std::optional<CausalVector> extract_variables(const SpeedDataset& ds, const TransitionSet& transitions,
                                              std::size_t node, std::size_t t) {
	check_graph(ds, transitions);
	if (node >= ds.nodes()) {
		throw InputError("node index " + std::to_string(node) + " out of range");
	}
	if (t + kCausalSlices >= ds.steps()) {
		return std::nullopt;
	}
	if (!span_observed(ds, neighborhood(transitions, node, ds.nodes(), 4), t, t + kCausalSlices)) {
		return std::nullopt;
	}
	CausalVector out{};
	for (std::size_t k = 0; k < kCausalPerspectives; ++k) {
		double prev = perspective_value(ds, transitions, k, node, t);
		for (std::size_t s = 0; s < kCausalSlices; ++s) {
			const double next = perspective_value(ds, transitions, k, node, t + s + 1);
			out[s * kCausalPerspectives + k] = next - prev;
			prev = next;
		}
	}
	return out;
}

const char* to_string(SampleSource s) {
	return s == SampleSource::Random ? "random" : "event";
}

SampleSource parse_sample_source(const std::string& s) {
	if (s == "random") return SampleSource::Random;
	if (s == "event") return SampleSource::Event;
	throw InputError("unknown sampling mode '" + s + "' (expected random or event)");
}

// --------------------------------------------------------------- events ----

Tensor neighborhood_variation(const SpeedDataset& ds, const TransitionSet& transitions, std::size_t span) {
	check_graph(ds, transitions);
	require(span >= 1, "event span must be at least 1");
	const std::size_t n = ds.nodes();
	if (ds.steps() <= span) {
		return Tensor({0, n});
	}
	const std::size_t rows = ds.steps() - span;
	Tensor u({rows, n});
	const double nan = std::numeric_limits<double>::quiet_NaN();
	std::vector<std::vector<std::size_t>> hood(n);
	for (std::size_t i = 0; i < n; ++i) {
		hood[i] = neighborhood(transitions, i, n, 2);
	}
	constexpr double weight[3] = {0.5, 0.25, 0.25};
	for (std::size_t t = 0; t < rows; ++t) {
		for (std::size_t i = 0; i < n; ++i) {
			bool ok = true;
			for (auto j : hood[i]) {
				ok = ok && ds.is_observed(t, j) && ds.is_observed(t + span, j);
			}
			if (!ok) {
				u.storage()[t * n + i] = nan;
				continue;
			}
			double v = 0.0;
			for (std::size_t k = 0; k < 3; ++k) {
				v += weight[k] * (perspective_value(ds, transitions, k, i, t + span) -
				                  perspective_value(ds, transitions, k, i, t));
			}
			u(t, i) = v;
		}
	}
	return u;
}

std::vector<TrafficEvent> detect_events(const SpeedDataset& ds, const TransitionSet& transitions,
                                        const EventParams& params) {
	require(params.threshold_sigma > 0.0, "event threshold must be positive");
	require(params.min_duration >= 1, "event duration must be at least 1");
	const Tensor u = neighborhood_variation(ds, transitions, params.span);
	const std::size_t n = ds.nodes();
	const std::size_t rows = u.empty() ? 0 : u.dim(0);
	const std::size_t train_rows = ds.split.train_end > 0 ? std::min(rows, ds.split.train_end) : rows;

	double sum = 0.0, sq = 0.0;
	std::size_t count = 0;
	for (std::size_t t = 0; t < train_rows; ++t) {
		for (std::size_t i = 0; i < n; ++i) {
			const double v = u.storage()[t * n + i];
			if (!std::isnan(v)) {
				sum += v;
				sq += v * v;
				++count;
			}
		}
	}
	std::vector<TrafficEvent> events;
	if (count < 2) {
		return events;
	}
	const double mean = sum / static_cast<double>(count);
	const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(count) - mean * mean));
	if (sd == 0.0) {
		return events;
	}
	const double limit = params.threshold_sigma * sd;
	for (std::size_t i = 0; i < n; ++i) {
		std::size_t t = 0;
		while (t < rows) {
			const double v = u.storage()[t * n + i];
			if (std::isnan(v) || std::abs(v) <= limit) {
				++t;
				continue;
			}
			const bool negative = v < 0.0;
			std::size_t e = t;
			double acc = 0.0;
			while (e < rows) {
				const double w = u.storage()[e * n + i];
				if (std::isnan(w) || std::abs(w) <= limit || (w < 0.0) != negative) {
					break;
				}
				acc += w;
				++e;
			}
			if (e - t >= params.min_duration) {
				events.push_back({i, t, e - t, acc / static_cast<double>(e - t)});
			}
			t = e;
		}
	}
	std::sort(events.begin(), events.end(), [](const TrafficEvent& a, const TrafficEvent& b) {
		const double ma = std::abs(a.magnitude), mb = std::abs(b.magnitude);
		if (ma != mb) return ma > mb;
		if (a.t != b.t) return a.t < b.t;
		return a.node < b.node;
	});
	if (params.max_events > 0 && events.size() > params.max_events) {
		events.resize(params.max_events);
	}
	return events;
}

// ------------------------------------------------------------- sampling ----

SampleResult sample_batches(const SpeedDataset& ds, const TransitionSet& transitions, const SampleOptions& opts) {
	check_graph(ds, transitions);
	require(opts.batch_size >= 1 && opts.repeats >= 1, "batch size and repeats must be positive");
	SampleResult result;
	if (ds.steps() <= kCausalSlices || ds.nodes() == 0) {
		result.warnings.push_back("dataset too short for causal variables");
		return result;
	}
	std::mt19937_64 rng(opts.seed);
	const std::size_t last_t = ds.steps() - kCausalSlices - 1;

	std::vector<std::pair<std::size_t, std::size_t>> pool;
	if (opts.mode == SampleSource::Event) {
		for (const auto& ev : detect_events(ds, transitions, opts.events)) {
			for (std::size_t t = ev.t; t < ev.t + ev.duration && t <= last_t; ++t) {
				pool.emplace_back(ev.node, t);
			}
		}
		std::sort(pool.begin(), pool.end());
		pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
		if (pool.empty()) {
			result.warnings.push_back("no events detected; event sampling produced no batches");
			return result;
		}
	}
	std::uniform_int_distribution<std::size_t> node_dist(0, ds.nodes() - 1);
	std::uniform_int_distribution<std::size_t> time_dist(0, last_t);

	for (std::size_t r = 0; r < opts.repeats; ++r) {
		std::vector<CausalVector> rows;
		rows.reserve(opts.batch_size);
		if (opts.mode == SampleSource::Random) {
			const std::size_t max_attempts = 20 * opts.batch_size;
			for (std::size_t a = 0; a < max_attempts && rows.size() < opts.batch_size; ++a) {
				const std::size_t node = node_dist(rng);
				const std::size_t t = time_dist(rng);
				if (auto v = extract_variables(ds, transitions, node, t)) {
					rows.push_back(*v);
				}
			}
		} else {
			std::vector<std::size_t> idx(pool.size());
			for (std::size_t i = 0; i < idx.size(); ++i) {
				idx[i] = i;
			}
			std::shuffle(idx.begin(), idx.end(), rng);
			for (std::size_t i = 0; i < idx.size() && rows.size() < opts.batch_size; ++i) {
				if (auto v = extract_variables(ds, transitions, pool[idx[i]].first, pool[idx[i]].second)) {
					rows.push_back(*v);
				}
			}
		}
		if (rows.size() < opts.batch_size) {
			result.warnings.push_back("batch " + std::to_string(r) + " has " + std::to_string(rows.size()) + " of " +
			                          std::to_string(opts.batch_size) + " requested rows");
		}
		CausalVariableBatch b;
		b.source = opts.mode;
		b.rows = Tensor({rows.size(), kCausalVariables});
		for (std::size_t i = 0; i < rows.size(); ++i) {
			std::copy(rows[i].begin(), rows[i].end(), b.rows.data().begin() + i * kCausalVariables);
		}
		result.batches.push_back(std::move(b));
	}
	return result;
}

// ---------------------------------------------------------- correlation ----

Tensor pearson(const Tensor& rows, std::vector<bool>* zero_variance) {
	require(rows.rank() == 2, "pearson: rows must be [S x V]");
	const std::size_t s = rows.dim(0), v = rows.dim(1);
	require(s >= 2, "pearson needs at least two rows");
	std::vector<double> mean(v, 0.0);
	for (std::size_t i = 0; i < s; ++i) {
		for (std::size_t j = 0; j < v; ++j) {
			mean[j] += rows(i, j);
		}
	}
	for (auto& m : mean) {
		m /= static_cast<double>(s);
	}
	std::vector<double> centered(s * v);
	for (std::size_t i = 0; i < s; ++i) {
		for (std::size_t j = 0; j < v; ++j) {
			centered[i * v + j] = rows(i, j) - mean[j];
		}
	}
	std::vector<double> cov(v * v, 0.0);
	kernels::gemm_tn(v, s, v, centered, centered, cov);
	Tensor r({v, v});
	std::vector<bool> zero(v);
	for (std::size_t j = 0; j < v; ++j) {
		zero[j] = !(cov[j * v + j] > 0.0);
	}
	for (std::size_t a = 0; a < v; ++a) {
		for (std::size_t b = 0; b < v; ++b) {
			if (a == b) {
				r(a, b) = 1.0;
			} else if (zero[a] || zero[b]) {
				r(a, b) = 0.0;
			} else {
				const double x = cov[a * v + b] / std::sqrt(cov[a * v + a] * cov[b * v + b]);
				r(a, b) = std::clamp(x, -1.0, 1.0);
			}
		}
	}
	// Symmetrise exactly; the two triangles can differ in the last bit.
	for (std::size_t a = 0; a < v; ++a) {
		for (std::size_t b = a + 1; b < v; ++b) {
			r(b, a) = r(a, b);
		}
	}
	if (zero_variance) {
		*zero_variance = std::move(zero);
	}
	return r;
}

const char* to_string(RelationKind k) {
	return k == RelationKind::Pearson ? "pearson" : "external_icd";
}

RelationMatrix pearson_matrix(const std::vector<CausalVariableBatch>& batches) {
	std::size_t total = 0;
	for (const auto& b : batches) {
		if (b.size() > 0) {
			require(b.rows.dim(1) == kCausalVariables, "causal batch must have 30 columns");
		}
		total += b.size();
	}
	if (total < 2) {
		throw DataError("pearson matrix needs at least two rows");
	}
	Tensor all({total, kCausalVariables});
	std::size_t at = 0;
	RelationMatrix m;
	m.sum = Tensor({kCausalVariables, kCausalVariables});
	for (const auto& b : batches) {
		std::copy(b.rows.data().begin(), b.rows.data().end(), all.data().begin() + at);
		at += b.rows.size();
		if (b.size() >= 2) {
			const Tensor r = pearson(b.rows);
			for (std::size_t i = 0; i < r.size(); ++i) {
				m.sum[i] += r[i];
			}
			++m.repeats;
		}
	}
	m.c = pearson(all, &m.zero_variance);
	m.kind = RelationKind::Pearson;
	m.rows = total;
	return m;
}

// ---------------------------------------------------------- link report ----

namespace {

double abs_r(const Tensor& c, std::size_t a, std::size_t b) {
	return std::abs(c(a, b));
}

double same_slice_mean(const Tensor& c, std::size_t p, std::size_t q) {
	double s = 0.0;
	for (std::size_t t = 0; t < kCausalSlices; ++t) {
		s += abs_r(c, t * kCausalPerspectives + p, t * kCausalPerspectives + q);
	}
	return s / static_cast<double>(kCausalSlices);
}

} // namespace

LinkReport neighbor_link_report(const RelationMatrix& m) {
	require(m.c.rank() == 2 && m.c.dim(0) == kCausalVariables && m.c.dim(1) == kCausalVariables,
	        "link report needs a 30 x 30 matrix");
	LinkReport r;
	r.x_i1 = same_slice_mean(m.c, 0, 1);
	r.x_o1 = same_slice_mean(m.c, 0, 2);
	r.i1_o1 = same_slice_mean(m.c, 1, 2);
	r.x_i2 = same_slice_mean(m.c, 0, 3);
	r.x_o2 = same_slice_mean(m.c, 0, 4);
	r.triangle_mean = (r.x_i1 + r.x_o1 + r.i1_o1) / 3.0;
	r.second_order_mean = (r.x_i2 + r.x_o2) / 2.0;
	for (std::size_t lag = 1; lag <= 3; ++lag) {
		double s = 0.0;
		std::size_t n = 0;
		for (std::size_t k = 0; k < kCausalPerspectives; ++k) {
			for (std::size_t t = 0; t + lag < kCausalSlices; ++t) {
				s += abs_r(m.c, t * kCausalPerspectives + k, (t + lag) * kCausalPerspectives + k);
				++n;
			}
		}
		r.self_lag[lag - 1] = s / static_cast<double>(n);
	}
	return r;
}

std::string LinkReport::to_json() const {
	nlohmann::json j = {{"triangle_mean_abs_r", triangle_mean},
	                    {"second_order_mean_abs_r", second_order_mean},
	                    {"x_i1", x_i1},
	                    {"x_o1", x_o1},
	                    {"i1_o1", i1_o1},
	                    {"x_i2", x_i2},
	                    {"x_o2", x_o2},
	                    {"self_lag_mean_abs_r", {self_lag[0], self_lag[1], self_lag[2]}}};
	return j.dump(2);
}

// --------------------------------------------------------- distribution ----

DistributionSummary distribution_summary(std::span<const double> values, std::size_t bins) {
	require(values.size() >= 2, "distribution summary needs at least two values");
	require(bins >= 1, "histogram needs at least one bin");
	DistributionSummary d;
	d.n = values.size();
	const double n = static_cast<double>(d.n);
	for (double v : values) {
		d.mean += v;
	}
	d.mean /= n;
	double m2 = 0.0, m3 = 0.0, m4 = 0.0;
	for (double v : values) {
		const double x = v - d.mean;
		m2 += x * x;
		m3 += x * x * x;
		m4 += x * x * x * x;
	}
	m2 /= n;
	m3 /= n;
	m4 /= n;
	d.std = std::sqrt(m2);
	if (m2 > 0.0) {
		d.skewness = m3 / std::pow(m2, 1.5);
		d.excess_kurtosis = m4 / (m2 * m2) - 3.0;
	}
	const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
	if (*lo == *hi) {
		d.bin_edges = {*lo, *hi};
		d.counts = {d.n};
		return d;
	}
	const double width = (*hi - *lo) / static_cast<double>(bins);
	d.bin_edges.resize(bins + 1);
	for (std::size_t b = 0; b <= bins; ++b) {
		d.bin_edges[b] = *lo + width * static_cast<double>(b);
	}
	d.bin_edges[bins] = *hi;
	d.counts.assign(bins, 0);
	for (double v : values) {
		auto b = static_cast<std::size_t>((v - *lo) / width);
		++d.counts[std::min(b, bins - 1)];
	}
	return d;
}

// ----------------------------------------------------------- file exchange ----

void write_batch_csv(const std::string& path, const CausalVariableBatch& batch) {
	std::ostringstream os;
	os << csv::join(causal_variable_names()) << '\n';
	for (std::size_t i = 0; i < batch.size(); ++i) {
		for (std::size_t j = 0; j < kCausalVariables; ++j) {
			os << (j ? "," : "") << csv::format_double(batch.rows(i, j));
		}
		os << '\n';
	}
	csv::write_text(path, os.str());
}

CausalVariableBatch read_batch_csv(const std::string& path) {
	const auto lines = csv::read_lines(path);
	if (lines.empty() || csv::split(lines[0]) != causal_variable_names()) {
		throw InputError("'" + path + "': header must list the 30 causal variables in order");
	}
	CausalVariableBatch b;
	b.rows = Tensor({lines.size() - 1, kCausalVariables});
	for (std::size_t i = 1; i < lines.size(); ++i) {
		const auto f = csv::split(lines[i]);
		if (f.size() != kCausalVariables) {
			throw InputError("'" + path + "' line " + std::to_string(i + 1) + ": expected 30 fields");
		}
		for (std::size_t j = 0; j < kCausalVariables; ++j) {
			const auto v = csv::parse_double(f[j]);
			if (!v || !std::isfinite(*v)) {
				throw InputError("'" + path + "' line " + std::to_string(i + 1) + ": bad value '" + f[j] + "'");
			}
			b.rows(i - 1, j) = *v;
		}
	}
	return b;
}

void export_batches(const std::string& dir, const std::vector<CausalVariableBatch>& batches) {
	fs::create_directories(dir);
	for (std::size_t i = 0; i < batches.size(); ++i) {
		char name[32];
		std::snprintf(name, sizeof name, "batch_%03zu.csv", i);
		write_batch_csv((fs::path(dir) / name).string(), batches[i]);
	}
}

std::vector<CausalVariableBatch> import_batches(const std::string& dir) {
	if (!fs::is_directory(dir)) {
		throw InputError("batch directory '" + dir + "' does not exist");
	}
	std::vector<std::string> files;
	for (const auto& e : fs::directory_iterator(dir)) {
		const auto name = e.path().filename().string();
		if (e.is_regular_file() && name.rfind("batch_", 0) == 0 && e.path().extension() == ".csv") {
			files.push_back(e.path().string());
		}
	}
	if (files.empty()) {
		throw InputError("no batch_*.csv files in '" + dir + "'");
	}
	std::sort(files.begin(), files.end());
	std::vector<CausalVariableBatch> out;
	for (const auto& f : files) {
		out.push_back(read_batch_csv(f));
	}
	return out;
}

void write_relation_csv(const std::string& path, const RelationMatrix& m) {
	require(m.c.rank() == 2 && m.c.dim(0) == kCausalVariables && m.c.dim(1) == kCausalVariables,
	        "relation matrix must be 30 x 30");
	const auto& names = causal_variable_names();
	std::ostringstream os;
	os << "variable," << csv::join(names) << '\n';
	for (std::size_t i = 0; i < kCausalVariables; ++i) {
		os << names[i];
		for (std::size_t j = 0; j < kCausalVariables; ++j) {
			os << ',' << csv::format_double(m.c(i, j));
		}
		os << '\n';
	}
	csv::write_text(path, os.str());
}

RelationMatrix import_relation(const std::string& path) {
	const auto lines = csv::read_lines(path);
	const auto& names = causal_variable_names();
	if (lines.size() != kCausalVariables + 1) {
		throw InputError("'" + path + "': relation matrix needs a header and 30 rows");
	}
	auto header = csv::split(lines[0]);
	if (header.size() != kCausalVariables + 1 || header[0] != "variable" ||
	    !std::equal(names.begin(), names.end(), header.begin() + 1)) {
		throw InputError("'" + path + "': header must be 'variable' followed by the 30 causal variables in order");
	}
	RelationMatrix m;
	m.kind = RelationKind::ExternalIcd;
	m.c = Tensor({kCausalVariables, kCausalVariables});
	for (std::size_t i = 0; i < kCausalVariables; ++i) {
		const auto f = csv::split(lines[i + 1]);
		if (f.size() != kCausalVariables + 1 || f[0] != names[i]) {
			throw InputError("'" + path + "' row " + std::to_string(i + 1) + ": expected label " + names[i] +
			                 " and 30 values");
		}
		for (std::size_t j = 0; j < kCausalVariables; ++j) {
			const auto v = csv::parse_double(f[j + 1]);
			if (!v || !std::isfinite(*v)) {
				throw InputError("'" + path + "' row " + std::to_string(i + 1) + ": bad value '" + f[j + 1] + "'");
			}
			m.c(i, j) = *v;
		}
	}
	m.sum = m.c;
	m.repeats = 1;
	m.zero_variance.assign(kCausalVariables, false);
	return m;
}

} // namespace gtc
