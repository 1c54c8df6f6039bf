#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtcausin/data.hpp"
#include "gtcausin/graph.hpp"
#include "gtcausin/layers.hpp"
#include "gtcausin/params.hpp"
#include "gtcausin/tape.hpp"

namespace gtc {

enum class Variant { CausIn, NoCausIn, BadCausIn };

// "gt-causin", "gt-nocausin", "gt-badcausin" (the "gt-" prefix is optional).
const char* to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ModelConfig {
	std::size_t num_blocks = 4;
	std::size_t block_width = 8;
	std::size_t diffusion_steps = 3;
	std::size_t tcn_kernel = 3;
	std::size_t input_window = 12;
	std::size_t output_window = 12;
	std::vector<std::size_t> eval_horizons{3, 6, 12};
	Variant variant = Variant::CausIn;
	std::uint64_t seed = 0;
	// Hidden width of the dense pair after the first block.
	std::size_t dense_hidden = 8;
	// Width of each calendar / historic embedding.
	std::size_t embed_width = 4;
	std::size_t fuse_hidden = 32;

	void validate() const;
	std::string to_json() const;
	static ModelConfig from_json(const std::string& text);
	friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Forecast {
	Tensor values;  // [N x 1 x T] de-normalised speeds
	std::vector<std::size_t> horizons;
};

// Intermediate values of one forward pass.
struct ForwardTrace {
	Var features;      // [N x 2 x T'] speed and speed-variation channels
	Var block_input;   // causal insight output (or features for NoCausIn)
	std::vector<Var> skips;
	Var merged;        // [N x width*L x T']
	Var normalized;    // [N x 1 x T]
	Var output;        // de-normalised
	AttentionTrace attention;
};

class Model {
public:
	Model(const ModelConfig& config, SensorGraph graph, NormStats norm);

	const ModelConfig& config() const noexcept { return config_; }
	const SensorGraph& graph() const noexcept { return graph_; }
	const TransitionSet& transitions() const noexcept { return transitions_; }
	const NormStats& norm() const noexcept { return norm_; }
	ParamStore& params() noexcept { return params_; }
	const ParamStore& params() const noexcept { return params_; }
	std::size_t nodes() const noexcept { return graph_.node_count(); }

	// window is [N x 1 x T'] normalised speeds. Parameters are bound from
	// params() so backward() accumulates into their gradients.
	ForwardTrace trace(Tape& tape, const Tensor& window, const Calendar& calendar);
	Var forward(Tape& tape, const Tensor& window, const Calendar& calendar);
	// GT blocks, dense pair and merge applied to an [N x 2 x T'] input.
	Var trunk(Tape& tape, Var block_input, std::vector<Var>* skips = nullptr);

	Forecast predict(const Tensor& window, const Calendar& calendar);
	AttentionTrace attention(const Tensor& window, const Calendar& calendar);
	CausalInsightParams causal_insight_params() const;

	std::string metadata_json() const;
	void save(const std::string& path) const;
	static Model load(const std::string& path);

private:
	Model(const ModelConfig& config, SensorGraph graph, NormStats norm, ParamStore params);
	void init_params();

	ModelConfig config_;
	SensorGraph graph_;
	TransitionSet transitions_;
	std::vector<Tensor> supports_;
	NormStats norm_;
	ParamStore params_;
};

// [N x 1 x T'] window -> [N x 2 x T'] with the first difference as the second
// channel (0 at the first step).
Tensor speed_features(const Tensor& window);

// Convenience wrapper for the BadCausIn variant.
Forecast bad_causal_forward(Model& model, const Tensor& window, const Calendar& calendar);

} // namespace gtc
