#include "gtcausin/layers.hpp"

#include <cmath>
#include <sstream>

#include "gtcausin/csv.hpp"
#include "gtcausin/error.hpp"

namespace gtc {

Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
	const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
	std::uniform_real_distribution<double> dist(-bound, bound);
	Tensor t(std::move(shape));
	for (auto& v : t.data()) {
		v = dist(rng);
	}
	return t;
}

Var dense(Tape& tape, Var x, Var w, Var b) {
	return ops::add_row_bias(tape, ops::matmul(tape, x, w), b);
}

Tensor one_hot(std::size_t width, std::size_t index) {
	require(index < width, "one_hot: index out of range");
	Tensor t({1, width});
	t(0, index) = 1.0;
	return t;
}

// ------------------------------------------------------ causal insight ----

CausalInsightParams CausalInsightParams::zeros(std::size_t f) {
	return {Tensor({f, f}), Tensor({f, f}), Tensor({f, f}), Tensor({f, f}),
	        Tensor({f, f}), Tensor({f, f}), Tensor({f, f})};
}

CausalInsightParams CausalInsightParams::random(std::size_t f, std::mt19937_64& rng) {
	CausalInsightParams p;
	for (Tensor* t : {&p.w_q, &p.w_k, &p.w_v, &p.w_out, &p.w_x, &p.w_i, &p.w_o}) {
		*t = uniform_init({f, f}, f, rng);
	}
	return p;
}

namespace {

const char* const kMixNames[2][3] = {{"w_x", "w_i", "w_o"}, {"w_x0", "w_x1", "w_x2"}};

std::size_t mode_index(TokenMode mode) {
	return mode == TokenMode::Neighbors ? 0 : 1;
}

Var bind_tensor(Tape& tape, const Tensor& t, bool trainable) {
	return trainable ? tape.leaf(t) : tape.constant(t);
}

} // namespace

CausalInsightVars bind_causal_insight(Tape& tape, const CausalInsightParams& p, bool trainable) {
	return {bind_tensor(tape, p.w_q, trainable),   bind_tensor(tape, p.w_k, trainable),
	        bind_tensor(tape, p.w_v, trainable),   bind_tensor(tape, p.w_out, trainable),
	        bind_tensor(tape, p.w_x, trainable),   bind_tensor(tape, p.w_i, trainable),
	        bind_tensor(tape, p.w_o, trainable)};
}

CausalInsightVars bind_causal_insight(Tape& tape, ParamStore& store, const std::string& prefix, TokenMode mode) {
	const auto& mix = kMixNames[mode_index(mode)];
	return {tape.param(store, prefix + "/w_q"),   tape.param(store, prefix + "/w_k"),
	        tape.param(store, prefix + "/w_v"),   tape.param(store, prefix + "/w_out"),
	        tape.param(store, prefix + "/" + mix[0]), tape.param(store, prefix + "/" + mix[1]),
	        tape.param(store, prefix + "/" + mix[2])};
}

void add_causal_insight_params(ParamStore& store, const std::string& prefix, std::size_t features, TokenMode mode,
                               std::mt19937_64& rng) {
	const auto& mix = kMixNames[mode_index(mode)];
	for (const std::string name : {"w_q", "w_k", "w_v", "w_out", mix[0], mix[1], mix[2]}) {
		store.add(prefix + "/" + name, uniform_init({features, features}, features, rng));
	}
}

Var causal_insight(Tape& tape, const CausalInsightVars& w, Var x, const TransitionSet& transitions, TokenMode mode,
                   AttentionTrace* trace) {
	const Tensor& X = tape.value(x);
	require(X.rank() == 2, "causal_insight: input must be [N x F]");
	const std::size_t n = X.dim(0);
	const std::size_t f = X.dim(1);
	require(transitions.t_i1.dim(0) == n, "causal_insight: input rows " + std::to_string(n) +
	                                          " do not match graph size " + std::to_string(transitions.t_i1.dim(0)));
	require(tape.value(w.w_q).shape() == Shape({f, f}), "causal_insight: projection size does not match features");

	Var i1 = x;
	Var o1 = x;
	if (mode == TokenMode::Neighbors) {
		i1 = ops::matmul(tape, tape.constant(transitions.t_i1), x);
		o1 = ops::matmul(tape, tape.constant(transitions.t_o1), x);
	}
	Var s = ops::concat_rows(tape, {x, i1, o1});
	Var q = ops::matmul(tape, s, w.w_q);
	Var k = ops::matmul(tape, s, w.w_k);
	Var v = ops::matmul(tape, s, w.w_v);
	Var scores = ops::scale(tape, ops::matmul(tape, q, ops::transpose(tape, k)), 1.0 / std::sqrt(double(f)));
	Var attn = ops::softmax_rows(tape, scores);
	Var s_out = ops::matmul(tape, ops::matmul(tape, attn, v), w.w_out);
	if (trace) {
		trace->scores = tape.value(scores);
		trace->weights = tape.value(attn);
	}
	Var xp = ops::slice_rows(tape, s_out, 0, n);
	Var ip = ops::slice_rows(tape, s_out, n, n);
	Var op = ops::slice_rows(tape, s_out, 2 * n, n);
	Var out = ops::add(tape, ops::matmul(tape, xp, w.w_x), ops::matmul(tape, ip, w.w_i));
	return ops::add(tape, out, ops::matmul(tape, op, w.w_o));
}

Tensor causal_insight_forward(const CausalInsightParams& params, const Tensor& x, const TransitionSet& transitions,
                              TokenMode mode) {
	Tape tape;
	const auto w = bind_causal_insight(tape, params);
	return tape.value(causal_insight(tape, w, tape.constant(x), transitions, mode));
}

StationAttention station_attention(const AttentionTrace& trace, const std::vector<std::string>& node_ids,
                                   std::size_t station, TokenMode mode) {
	const std::size_t n = node_ids.size();
	if (station >= n) {
		throw InputError("station index " + std::to_string(station) + " out of range (" + std::to_string(n) +
		                 " nodes)");
	}
	require(trace.scores.rank() == 2 && trace.scores.dim(0) == 3 * n, "attention trace does not match node count");
	const char* const prefixes[2][3] = {{"X", "I1", "O1"}, {"X0", "X1", "X2"}};
	const auto& pre = prefixes[mode_index(mode)];
	StationAttention out;
	for (std::size_t g = 0; g < 3; ++g) {
		for (std::size_t j = 0; j < n; ++j) {
			out.column_labels.push_back(std::string(pre[g]) + ":" + node_ids[j]);
		}
	}
	out.scores = Tensor({3, 3 * n});
	out.weights = Tensor({3, 3 * n});
	for (std::size_t g = 0; g < 3; ++g) {
		const std::size_t row = g * n + station;
		out.row_labels.push_back(out.column_labels[row]);
		for (std::size_t c = 0; c < 3 * n; ++c) {
			out.scores(g, c) = trace.scores(row, c);
			out.weights(g, c) = trace.weights(row, c);
		}
	}
	return out;
}

StationAttention extract_attention_scores(const CausalInsightParams& params, const Tensor& x,
                                          const TransitionSet& transitions, const std::vector<std::string>& node_ids,
                                          std::size_t station, TokenMode mode) {
	if (station >= node_ids.size()) {
		throw InputError("station index " + std::to_string(station) + " out of range");
	}
	Tape tape;
	const auto w = bind_causal_insight(tape, params);
	AttentionTrace trace;
	causal_insight(tape, w, tape.constant(x), transitions, mode, &trace);
	return station_attention(trace, node_ids, station, mode);
}

std::string attention_csv(const StationAttention& a) {
	std::ostringstream os;
	os << "row_token,token_label,score,weight\n";
	for (std::size_t r = 0; r < a.row_labels.size(); ++r) {
		for (std::size_t c = 0; c < a.column_labels.size(); ++c) {
			os << a.row_labels[r] << ',' << a.column_labels[c] << ',' << csv::format_double(a.scores(r, c)) << ','
			   << csv::format_double(a.weights(r, c)) << '\n';
		}
	}
	return os.str();
}

// ----------------------------------------------------- graph diffusion ----

Tensor diffusion_forward(const DiffusionParams& params, const Tensor& x, const SensorGraph& graph) {
	require(params.theta.rank() == 4, "diffusion theta must be [Q x P x K x 2]");
	require(x.rank() == 2 || x.rank() == 3, "diffusion input must be [N x P] or [N x P x T]");
	if (x.dim(0) != graph.node_count()) {
		throw InputError("diffusion input has " + std::to_string(x.dim(0)) + " rows, graph has " +
		                 std::to_string(graph.node_count()) + " nodes");
	}
	const Tensor x3 = x.rank() == 3 ? x : x.reshaped({x.dim(0), x.dim(1), 1});
	const auto supports = random_walk_powers(graph, params.max_steps());
	Tape tape;
	Var y = ops::diffusion(tape, tape.constant(x3), tape.constant(params.theta), supports);
	const Tensor& out = tape.value(y);
	return x.rank() == 3 ? out : out.reshaped({out.dim(0), out.dim(1)});
}

// ---------------------------------------------------------------- TCN ----

Tensor tcn_forward(const TcnParams& params, const Tensor& x) {
	require(x.rank() == 3 && x.dim(2) >= 1, "tcn input must be [N x P x T] with T >= 1");
	Tape tape;
	return tape.value(ops::causal_conv(tape, tape.constant(x), tape.constant(params.theta), params.dilation));
}

// ---------------------------------------------------------------- merge ----

Tensor merge_forward(const std::vector<Tensor>& block_outputs) {
	Tape tape;
	std::vector<Var> parts;
	for (const auto& b : block_outputs) {
		parts.push_back(tape.constant(b));
	}
	return tape.value(ops::concat_channels(tape, parts));
}

// ----------------------------------------------------------- inherent ----

HistoricSpeed historic_speed(const SpeedDataset& ds, std::size_t t) {
	require(t < ds.steps(), "historic_speed: timestamp index out of range");
	const std::size_t n = ds.nodes();
	HistoricSpeed out{std::vector<double>(n, ds.norm.mean), std::vector<bool>(n, true)};
	const std::int64_t dt = ds.spacing();
	if (dt <= 0 || 86400 % dt != 0) {
		return out;
	}
	const auto per_day = static_cast<std::size_t>(86400 / dt);
	const bool weekend = is_weekend(ds.timestamps[t]);
	const std::size_t need = weekend ? 2 : 5;
	std::vector<std::size_t> days;
	for (std::size_t back = per_day; back <= t && days.size() < need; back += per_day) {
		const std::size_t idx = t - back;
		if (is_weekend(ds.timestamps[idx]) == weekend) {
			days.push_back(idx);
		}
	}
	for (std::size_t j = 0; j < n; ++j) {
		double sum = 0.0;
		std::size_t count = 0;
		for (auto idx : days) {
			if (ds.is_observed(idx, j)) {
				sum += ds.speed(idx, j);
				++count;
			}
		}
		if (count > 0) {
			out.values[j] = sum / static_cast<double>(count);
			out.fallback[j] = false;
		}
	}
	return out;
}

Calendar make_calendar(const SpeedDataset& ds, std::size_t t) {
	require(t < ds.steps(), "make_calendar: timestamp index out of range");
	Calendar c;
	c.day_of_week = day_of_week(ds.timestamps[t]);
	c.month = month_of_year(ds.timestamps[t]);
	auto h = historic_speed(ds, t);
	c.historic.resize(h.values.size());
	for (std::size_t j = 0; j < h.values.size(); ++j) {
		c.historic[j] = (h.values[j] - ds.norm.mean) / ds.norm.std;
	}
	c.historic_fallback = std::move(h.fallback);
	return c;
}

InherentVars bind_inherent(Tape& tape, const InherentParams& p, bool trainable) {
	return {bind_tensor(tape, p.embed_day, trainable), bind_tensor(tape, p.embed_month, trainable),
	        bind_tensor(tape, p.embed_hist, trainable), bind_tensor(tape, p.fuse1_w, trainable),
	        bind_tensor(tape, p.fuse1_b, trainable),   bind_tensor(tape, p.fuse2_w, trainable),
	        bind_tensor(tape, p.fuse2_b, trainable)};
}

InherentVars bind_inherent(Tape& tape, ParamStore& store, const std::string& prefix) {
	return {tape.param(store, prefix + "/embed_day"), tape.param(store, prefix + "/embed_month"),
	        tape.param(store, prefix + "/embed_hist"), tape.param(store, prefix + "/fuse1/w"),
	        tape.param(store, prefix + "/fuse1/b"),    tape.param(store, prefix + "/fuse2/w"),
	        tape.param(store, prefix + "/fuse2/b")};
}

Var inherent(Tape& tape, const InherentVars& w, Var merged, const Calendar& calendar, std::size_t out_features) {
	const Tensor& M = tape.value(merged);
	require(M.rank() == 3, "inherent: merged features must be [N x C x T']");
	const std::size_t n = M.dim(0);
	require(calendar.day_of_week >= 0 && calendar.day_of_week < 7, "calendar day of week out of range");
	require(calendar.month >= 0 && calendar.month < 12, "calendar month out of range");
	require(calendar.historic.empty() || calendar.historic.size() == n, "calendar historic speeds do not match nodes");

	Var flat = ops::reshape(tape, merged, {n, M.dim(1) * M.dim(2)});
	Var day = ops::matmul(tape, tape.constant(one_hot(7, static_cast<std::size_t>(calendar.day_of_week))), w.embed_day);
	Var month = ops::matmul(tape, tape.constant(one_hot(12, static_cast<std::size_t>(calendar.month))), w.embed_month);
	Tensor hist({n, 1});
	for (std::size_t j = 0; j < calendar.historic.size(); ++j) {
		hist(j, 0) = calendar.historic[j];
	}
	Var eh = ops::matmul(tape, tape.constant(std::move(hist)), w.embed_hist);
	Var fused = ops::concat_cols(tape, {flat, ops::repeat_rows(tape, day, n), ops::repeat_rows(tape, month, n), eh});
	Var h = ops::relu(tape, dense(tape, fused, w.fuse1_w, w.fuse1_b));
	Var o = dense(tape, h, w.fuse2_w, w.fuse2_b);
	const std::size_t width = tape.value(o).dim(1);
	require(out_features > 0 && width % out_features == 0, "inherent: output width not divisible by features");
	return ops::reshape(tape, o, {n, out_features, width / out_features});
}

Tensor inherent_forward(const InherentParams& params, const Tensor& merged, const Calendar& calendar,
                        std::size_t out_features) {
	Tape tape;
	const auto w = bind_inherent(tape, params);
	return tape.value(inherent(tape, w, tape.constant(merged), calendar, out_features));
}

} // namespace gtc
