#include "gtcausin/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gtcausin/error.hpp"

namespace gtc {

std::size_t shape_size(const Shape& shape) {
	std::size_t n = 1;
	for (auto d : shape) {
		n *= d;
	}
	return n;
}

std::string shape_string(const Shape& shape) {
	std::ostringstream os;
	os << '[';
	for (std::size_t i = 0; i < shape.size(); ++i) {
		os << (i ? "x" : "") << shape[i];
	}
	os << ']';
	return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
	if (data_.size() != shape_size(shape_)) {
		throw InputError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
		                 shape_string(shape_));
	}
	if (!all_finite()) {
		throw NumericError("tensor created with non-finite entries");
	}
}

Tensor Tensor::identity(std::size_t n) {
	Tensor t({n, n});
	for (std::size_t i = 0; i < n; ++i) {
		t(i, i) = 1.0;
	}
	return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
	require(!rows.empty(), "from_rows: no rows");
	const std::size_t cols = rows.front().size();
	std::vector<double> data;
	data.reserve(rows.size() * cols);
	for (const auto& r : rows) {
		require(r.size() == cols, "from_rows: ragged rows");
		data.insert(data.end(), r.begin(), r.end());
	}
	return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
	if (shape_size(shape) != data_.size()) {
		throw InputError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
	}
	Tensor out;
	out.shape_ = std::move(shape);
	out.data_ = data_;
	return out;
}

Tensor Tensor::transposed() const {
	require(rank() == 2, "transposed: rank-2 tensor required");
	const std::size_t m = shape_[0];
	const std::size_t n = shape_[1];
	Tensor out({n, m});
	for (std::size_t i = 0; i < m; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			out(j, i) = (*this)(i, j);
		}
	}
	return out;
}

void Tensor::fill(double v) {
	std::fill(data_.begin(), data_.end(), v);
}

bool Tensor::all_finite() const noexcept {
	return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
	double m = 0.0;
	for (double v : data_) {
		m = std::max(m, std::abs(v));
	}
	return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
	require(a.shape() == b.shape(), "max_abs_diff: shape mismatch");
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		m = std::max(m, std::abs(a[i] - b[i]));
	}
	return m;
}

} // namespace gtc
