#pragma once

#include <random>
#include <string>
#include <vector>

#include "gtcausin/data.hpp"
#include "gtcausin/graph.hpp"
#include "gtcausin/params.hpp"
#include "gtcausin/tape.hpp"

namespace gtc {

// ------------------------------------------------------ causal insight ----
//
// Tokens are one row per node per perspective: S = [X; I1; O1] is [3N x F]
// with I1 = t_i1 X and O1 = t_o1 X. Single-head scaled dot-product attention
// over all 3N tokens, followed by an output projection, gives S' = [X'; I1'; O1'].
// The layer returns X' W_x + I1' W_i + O1' W_o. Matrices act on row vectors.

struct CausalInsightParams {
	Tensor w_q, w_k, w_v, w_out;
	Tensor w_x, w_i, w_o;

	static CausalInsightParams zeros(std::size_t features);
	static CausalInsightParams random(std::size_t features, std::mt19937_64& rng);
};

// Repeated mode replaces the neighbour tokens with copies of X.
enum class TokenMode { Neighbors, Repeated };

struct CausalInsightVars {
	Var w_q, w_k, w_v, w_out, w_x, w_i, w_o;
};

struct AttentionTrace {
	Tensor scores;   // [3N x 3N] pre-softmax
	Tensor weights;  // [3N x 3N] post-softmax
};

CausalInsightVars bind_causal_insight(Tape& tape, const CausalInsightParams& p, bool trainable = false);
CausalInsightVars bind_causal_insight(Tape& tape, ParamStore& store, const std::string& prefix, TokenMode mode);
void add_causal_insight_params(ParamStore& store, const std::string& prefix, std::size_t features, TokenMode mode,
                               std::mt19937_64& rng);

Var causal_insight(Tape& tape, const CausalInsightVars& w, Var x, const TransitionSet& transitions, TokenMode mode,
                   AttentionTrace* trace = nullptr);

Tensor causal_insight_forward(const CausalInsightParams& params, const Tensor& x, const TransitionSet& transitions,
                              TokenMode mode = TokenMode::Neighbors);

struct StationAttention {
	std::vector<std::string> row_labels;     // the station's 3 tokens
	std::vector<std::string> column_labels;  // all 3N tokens
	Tensor scores;                           // [3 x 3N]
	Tensor weights;                          // [3 x 3N]
};

StationAttention station_attention(const AttentionTrace& trace, const std::vector<std::string>& node_ids,
                                   std::size_t station, TokenMode mode);
StationAttention extract_attention_scores(const CausalInsightParams& params, const Tensor& x,
                                          const TransitionSet& transitions, const std::vector<std::string>& node_ids,
                                          std::size_t station, TokenMode mode = TokenMode::Neighbors);
// CSV with columns row_token,token_label,score,weight.
std::string attention_csv(const StationAttention& a);

// ----------------------------------------------------- graph diffusion ----

struct DiffusionParams {
	Tensor theta;  // [Q x P x K x 2]
	std::size_t max_steps() const { return theta.dim(2); }
};

// x is [N x P] or [N x P x T]; the result has the same rank with Q features.
Tensor diffusion_forward(const DiffusionParams& params, const Tensor& x, const SensorGraph& graph);

// ---------------------------------------------------------------- TCN ----

struct TcnParams {
	Tensor theta;  // [Q x P x K]
	std::size_t dilation = 1;
	std::size_t kernel_size() const { return theta.dim(2); }
};

Tensor tcn_forward(const TcnParams& params, const Tensor& x);

// ---------------------------------------------------------------- merge ----

Tensor merge_forward(const std::vector<Tensor>& block_outputs);

// ----------------------------------------------------------- inherent ----

struct HistoricSpeed {
	std::vector<double> values;  // raw speed units
	std::vector<bool> fallback;  // true where no prior same-category reading existed
};

// Mean of the readings at the same time of day on the 5 most recent prior
// weekdays (weekday t) or the 2 most recent prior weekend days (weekend t).
HistoricSpeed historic_speed(const SpeedDataset& ds, std::size_t t);

// Calendar of timestamp index t with normalised historic speeds.
Calendar make_calendar(const SpeedDataset& ds, std::size_t t);

struct InherentParams {
	Tensor embed_day;    // [7 x E_d]
	Tensor embed_month;  // [12 x E_m]
	Tensor embed_hist;   // [1 x E_h]
	Tensor fuse1_w, fuse1_b;  // [F x H], [1 x H]
	Tensor fuse2_w, fuse2_b;  // [H x T*Q], [1 x T*Q]
};

struct InherentVars {
	Var embed_day, embed_month, embed_hist, fuse1_w, fuse1_b, fuse2_w, fuse2_b;
};

InherentVars bind_inherent(Tape& tape, const InherentParams& p, bool trainable = false);
InherentVars bind_inherent(Tape& tape, ParamStore& store, const std::string& prefix);

// merged is [N x C x T']; returns [N x Q x T] with T = fuse2 width / Q.
Var inherent(Tape& tape, const InherentVars& w, Var merged, const Calendar& calendar, std::size_t out_features);
Tensor inherent_forward(const InherentParams& params, const Tensor& merged, const Calendar& calendar,
                        std::size_t out_features = 1);

Tensor one_hot(std::size_t width, std::size_t index);

// ----------------------------------------------------------- helpers ----

// x W + b with b broadcast over rows.
Var dense(Tape& tape, Var x, Var w, Var b);
// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

} // namespace gtc
