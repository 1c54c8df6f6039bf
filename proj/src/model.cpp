#include "gtcausin/model.hpp"

#include <algorithm>
#include <random>

#include <json.hpp>

#include "gtcausin/error.hpp"

namespace gtc {

using nlohmann::json;

const char* to_string(Variant v) {
	switch (v) {
	case Variant::CausIn: return "gt-causin";
	case Variant::NoCausIn: return "gt-nocausin";
	case Variant::BadCausIn: return "gt-badcausin";
	}
	return "?";
}

Variant parse_variant(const std::string& s) {
	std::string k = s;
	std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
	if (k.rfind("gt-", 0) == 0) {
		k = k.substr(3);
	}
	if (k == "causin") return Variant::CausIn;
	if (k == "nocausin") return Variant::NoCausIn;
	if (k == "badcausin") return Variant::BadCausIn;
	throw InputError("unknown variant '" + s + "' (expected gt-causin, gt-nocausin or gt-badcausin)");
}

void ModelConfig::validate() const {
	require(num_blocks >= 1, "num_blocks must be at least 1");
	require(block_width >= 1, "block_width must be positive");
	require(diffusion_steps >= 1, "diffusion_steps must be at least 1");
	require(tcn_kernel >= 1, "tcn_kernel must be at least 1");
	require(input_window >= 1 && output_window >= 1, "windows must be non-empty");
	require(num_blocks < 32, "num_blocks too large for the dilation schedule");
	require(dense_hidden >= 1 && embed_width >= 1 && fuse_hidden >= 1, "hidden widths must be positive");
	for (auto h : eval_horizons) {
		require(h >= 1 && h <= output_window, "eval horizon " + std::to_string(h) + " outside [1, T]");
	}
}

std::string ModelConfig::to_json() const {
	json j = {{"num_blocks", num_blocks},     {"block_width", block_width},   {"diffusion_steps", diffusion_steps},
	          {"tcn_kernel", tcn_kernel},     {"input_window", input_window}, {"output_window", output_window},
	          {"eval_horizons", eval_horizons}, {"variant", to_string(variant)}, {"seed", seed},
	          {"dense_hidden", dense_hidden}, {"embed_width", embed_width},   {"fuse_hidden", fuse_hidden}};
	return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
	try {
		const json j = json::parse(text);
		ModelConfig c;
		c.num_blocks = j.at("num_blocks");
		c.block_width = j.at("block_width");
		c.diffusion_steps = j.at("diffusion_steps");
		c.tcn_kernel = j.at("tcn_kernel");
		c.input_window = j.at("input_window");
		c.output_window = j.at("output_window");
		c.eval_horizons = j.at("eval_horizons").get<std::vector<std::size_t>>();
		c.variant = parse_variant(j.at("variant"));
		c.seed = j.at("seed");
		c.dense_hidden = j.value("dense_hidden", c.dense_hidden);
		c.embed_width = j.value("embed_width", c.embed_width);
		c.fuse_hidden = j.value("fuse_hidden", c.fuse_hidden);
		c.validate();
		return c;
	} catch (const json::exception& e) {
		throw InputError(std::string("bad model config: ") + e.what());
	}
}

Tensor speed_features(const Tensor& window) {
	require(window.rank() == 3 && window.dim(1) == 1, "window must be [N x 1 x T']");
	if (!window.all_finite()) {
		throw InputError("window contains non-finite values");
	}
	const std::size_t n = window.dim(0), t = window.dim(2);
	Tensor out({n, 2, t});
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t s = 0; s < t; ++s) {
			out(i, 0, s) = window(i, 0, s);
			out(i, 1, s) = s == 0 ? 0.0 : window(i, 0, s) - window(i, 0, s - 1);
		}
	}
	return out;
}

Model::Model(const ModelConfig& config, SensorGraph graph, NormStats norm)
    : config_(config), graph_(std::move(graph)), norm_(norm) {
	config_.validate();
	transitions_ = build_transitions(graph_);
	supports_ = random_walk_powers(graph_, config_.diffusion_steps);
	init_params();
}

Model::Model(const ModelConfig& config, SensorGraph graph, NormStats norm, ParamStore params)
    : Model(config, std::move(graph), norm) {
	for (const auto& [name, e] : params_.entries()) {
		if (!params.contains(name)) {
			throw InputError("checkpoint is missing parameter '" + name + "'");
		}
		if (params.at(name).value.shape() != e.value.shape()) {
			throw InputError("checkpoint parameter '" + name + "' has shape " +
			                 shape_string(params.at(name).value.shape()) + ", expected " + shape_string(e.value.shape()));
		}
	}
	if (params.entries().size() != params_.entries().size()) {
		throw InputError("checkpoint has unexpected parameters");
	}
	params_ = std::move(params);
}

void Model::init_params() {
	std::mt19937_64 rng(config_.seed);
	const std::size_t w = config_.block_width;
	const std::size_t f = 2 * config_.input_window;
	if (config_.variant != Variant::NoCausIn) {
		const auto mode = config_.variant == Variant::CausIn ? TokenMode::Neighbors : TokenMode::Repeated;
		add_causal_insight_params(params_, "causal_insight", f, mode, rng);
	}
	for (std::size_t l = 0; l < config_.num_blocks; ++l) {
		const std::string b = "block" + std::to_string(l);
		const std::size_t p = l == 0 ? 2 : w;
		const std::size_t k = config_.diffusion_steps;
		params_.add(b + "/diffusion/theta", uniform_init({w, p, k, 2}, p * k * 2, rng));
		params_.add(b + "/tcn/theta", uniform_init({w, w, config_.tcn_kernel}, w * config_.tcn_kernel, rng));
	}
	const std::size_t h = config_.dense_hidden;
	params_.add("dense1/w", uniform_init({w, h}, w, rng));
	params_.add("dense1/b", uniform_init({1, h}, w, rng));
	params_.add("dense2/w", uniform_init({h, w}, h, rng));
	params_.add("dense2/b", uniform_init({1, w}, h, rng));

	const std::size_t e = config_.embed_width;
	const std::size_t width = w * config_.num_blocks * config_.input_window + 3 * e;
	params_.add("inherent/embed_day", uniform_init({7, e}, 7, rng));
	params_.add("inherent/embed_month", uniform_init({12, e}, 12, rng));
	params_.add("inherent/embed_hist", uniform_init({1, e}, 1, rng));
	params_.add("inherent/fuse1/w", uniform_init({width, config_.fuse_hidden}, width, rng));
	params_.add("inherent/fuse1/b", uniform_init({1, config_.fuse_hidden}, width, rng));
	params_.add("inherent/fuse2/w", uniform_init({config_.fuse_hidden, config_.output_window}, config_.fuse_hidden, rng));
	params_.add("inherent/fuse2/b", uniform_init({1, config_.output_window}, config_.fuse_hidden, rng));
}

Var Model::trunk(Tape& tape, Var h, std::vector<Var>* skips) {
	std::vector<Var> out;
	const std::size_t n = nodes();
	const std::size_t t = tape.value(h).dim(2);
	for (std::size_t l = 0; l < config_.num_blocks; ++l) {
		const std::string b = "block" + std::to_string(l);
		h = ops::diffusion(tape, h, tape.param(params_, b + "/diffusion/theta"), supports_);
		h = ops::causal_conv(tape, h, tape.param(params_, b + "/tcn/theta"), std::size_t{1} << l);
		if (l == 0) {
			Var r = ops::channels_to_rows(tape, h);
			r = ops::relu(tape, dense(tape, r, tape.param(params_, "dense1/w"), tape.param(params_, "dense1/b")));
			r = dense(tape, r, tape.param(params_, "dense2/w"), tape.param(params_, "dense2/b"));
			h = ops::rows_to_channels(tape, r, n, t);
		}
		out.push_back(h);
	}
	Var merged = ops::concat_channels(tape, out);
	if (skips) {
		*skips = std::move(out);
	}
	return merged;
}

ForwardTrace Model::trace(Tape& tape, const Tensor& window, const Calendar& calendar) {
	const std::size_t n = nodes();
	const std::size_t t = config_.input_window;
	if (window.rank() != 3 || window.dim(0) != n || window.dim(1) != 1 || window.dim(2) != t) {
		throw InputError("window shape " + shape_string(window.shape()) + " does not match [" + std::to_string(n) +
		                 " x 1 x " + std::to_string(t) + "]");
	}
	ForwardTrace tr;
	tr.features = tape.constant(speed_features(window));
	tr.block_input = tr.features;
	if (config_.variant != Variant::NoCausIn) {
		const auto mode = config_.variant == Variant::CausIn ? TokenMode::Neighbors : TokenMode::Repeated;
		const auto w = bind_causal_insight(tape, params_, "causal_insight", mode);
		Var x = ops::reshape(tape, tr.features, {n, 2 * t});
		Var y = causal_insight(tape, w, x, transitions_, mode, &tr.attention);
		tr.block_input = ops::reshape(tape, y, {n, 2, t});
	}
	tr.merged = trunk(tape, tr.block_input, &tr.skips);
	const auto iw = bind_inherent(tape, params_, "inherent");
	tr.normalized = inherent(tape, iw, tr.merged, calendar, 1);
	tr.output = ops::affine(tape, tr.normalized, norm_.std, norm_.mean);
	return tr;
}

Var Model::forward(Tape& tape, const Tensor& window, const Calendar& calendar) {
	return trace(tape, window, calendar).output;
}

Forecast Model::predict(const Tensor& window, const Calendar& calendar) {
	Tape tape;
	Var y = forward(tape, window, calendar);
	return {tape.value(y), config_.eval_horizons};
}

AttentionTrace Model::attention(const Tensor& window, const Calendar& calendar) {
	if (config_.variant == Variant::NoCausIn) {
		throw InputError("gt-nocausin has no causal insight layer");
	}
	Tape tape;
	return trace(tape, window, calendar).attention;
}

CausalInsightParams Model::causal_insight_params() const {
	if (config_.variant == Variant::NoCausIn) {
		throw InputError("gt-nocausin has no causal insight layer");
	}
	const bool bad = config_.variant == Variant::BadCausIn;
	auto get = [&](const char* name) { return params_.at(std::string("causal_insight/") + name).value; };
	return {get("w_q"), get("w_k"), get("w_v"), get("w_out"), get(bad ? "w_x0" : "w_x"), get(bad ? "w_x1" : "w_i"),
	        get(bad ? "w_x2" : "w_o")};
}

std::string Model::metadata_json() const {
	json adj = json::array();
	for (std::size_t i = 0; i < nodes(); ++i) {
		json row = json::array();
		for (std::size_t j = 0; j < nodes(); ++j) {
			row.push_back(graph_.adjacency(i, j));
		}
		adj.push_back(std::move(row));
	}
	json j = {{"format", "gtcausin-model"},
	          {"config", json::parse(config_.to_json())},
	          {"norm", {{"mean", norm_.mean}, {"std", norm_.std}}},
	          {"node_ids", graph_.node_ids},
	          {"adjacency", std::move(adj)}};
	return j.dump();
}

void Model::save(const std::string& path) const {
	save_params(path, params_, metadata_json());
}

Model Model::load(const std::string& path) {
	std::string meta;
	ParamStore params = load_params(path, &meta);
	try {
		const json j = json::parse(meta);
		if (j.value("format", "") != "gtcausin-model") {
			throw InputError("'" + path + "' is not a model checkpoint");
		}
		const auto config = ModelConfig::from_json(j.at("config").dump());
		const NormStats norm{j.at("norm").at("mean"), j.at("norm").at("std")};
		SensorGraph g;
		g.node_ids = j.at("node_ids").get<std::vector<std::string>>();
		const auto rows = j.at("adjacency").get<std::vector<std::vector<double>>>();
		require(rows.size() == g.node_ids.size(), "checkpoint adjacency does not match node ids");
		g.adjacency = Tensor::from_rows(rows);
		return Model(config, std::move(g), norm, std::move(params));
	} catch (const json::exception& e) {
		throw InputError("bad checkpoint metadata in '" + path + "': " + e.what());
	}
}

Forecast bad_causal_forward(Model& model, const Tensor& window, const Calendar& calendar) {
	if (model.config().variant != Variant::BadCausIn) {
		throw InputError("bad_causal_forward requires the gt-badcausin variant");
	}
	return model.predict(window, calendar);
}

} // namespace gtc
