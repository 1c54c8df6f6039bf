#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gtcausin/params.hpp"
#include "gtcausin/tensor.hpp"

namespace gtc {

// Handle to a value recorded on a Tape.
struct Var {
	static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
	std::size_t id = npos;
	bool valid() const noexcept { return id != npos; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, std::size_t self)>;

// Single-threaded reverse-mode recording. Values are appended in evaluation
// order; backward() walks them in reverse and accumulates gradients into
// inputs that require them. Parameter leaves flush their gradient into the
// owning ParamStore at the end of backward().
class Tape {
public:
	Var constant(Tensor value);
	Var leaf(Tensor value);
	Var param(ParamStore& store, const std::string& name);

	const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
	const Tensor& grad(Var v) const;
	bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
	std::size_t size() const noexcept { return nodes_.size(); }

	// Root must hold a single element; it is seeded with 1.
	void backward(Var root);
	void backward(Var root, const Tensor& seed);

	// Op-author interface.
	Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
	Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);
	const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
	const Tensor& grad_at(std::size_t id) const { return nodes_[id].grad; }
	bool needs_grad_at(std::size_t id) const { return nodes_[id].requires_grad; }
	// Gradient buffer of node `id`, allocated as zeros on first use.
	Tensor& grad_buffer(std::size_t id);

	// Smallest |pre-activation| seen by any rectifier on this tape. Gradient
	// checks use it to skip points that sit near a kink.
	double min_kink_distance() const noexcept { return min_kink_; }
	void note_kink_distance(double d) noexcept {
		if (d < min_kink_) {
			min_kink_ = d;
		}
	}
	// Hash of which side of the kink every rectifier input fell on.
	std::uint64_t kink_pattern() const noexcept { return pattern_; }
	void note_kink_side(bool positive) noexcept { pattern_ = (pattern_ ^ (positive ? 1u : 2u)) * 1099511628211ull; }

private:
	struct Node {
		Tensor value;
		Tensor grad;
		bool requires_grad = false;
		BackwardFn backward;
		Tensor* sink = nullptr;
	};
	std::vector<Node> nodes_;
	double min_kink_ = std::numeric_limits<double>::infinity();
	std::uint64_t pattern_ = 14695981039346656037ull;
};

namespace ops {

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
// a * mul + shift, elementwise.
Var affine(Tape& t, Var a, double mul, double shift);
Var relu(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a);
Var transpose(Tape& t, Var a);
Var reshape(Tape& t, Var a, Shape shape);

// Rank-2 concatenation along rows (stacks) or columns (widens).
Var concat_rows(Tape& t, const std::vector<Var>& parts);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var slice_rows(Tape& t, Var a, std::size_t begin, std::size_t count);

// Rank-3 [N x C x T] concatenation along the channel axis.
Var concat_channels(Tape& t, const std::vector<Var>& parts);
// [N x C x T] <-> [(N*T) x C] so per-(node, time) dense layers become matmuls.
Var channels_to_rows(Tape& t, Var a);
Var rows_to_channels(Tape& t, Var a, std::size_t nodes, std::size_t time);

// [m x n] + [1 x n] broadcast over rows.
Var add_row_bias(Tape& t, Var a, Var bias);
// [1 x n] repeated to [m x n].
Var repeat_rows(Tape& t, Var a, std::size_t m);

// Dilated causal convolution, x [N x P x T], theta [Q x P x K] -> [N x Q x T].
Var causal_conv(Tape& t, Var x, Var theta, std::size_t dilation);
// Graph diffusion, x [N x P x T], theta [Q x P x K x 2], supports[2k + dir]
// is the k-th power of the forward (dir 0) or reverse (dir 1) transition.
Var diffusion(Tape& t, Var x, Var theta, const std::vector<Tensor>& supports);

// Sum of |pred - target| over entries with mask != 0.
Var masked_abs_sum(Tape& t, Var pred, const Tensor& target, const Tensor& mask);
// Sum of a * w elementwise (a fixed linear functional).
Var dot_const(Tape& t, Var a, const Tensor& w);

} // namespace ops
} // namespace gtc
