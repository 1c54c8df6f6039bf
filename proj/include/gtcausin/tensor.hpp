#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gtc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles.
class Tensor {
public:
	Tensor() = default;
	explicit Tensor(Shape shape, double fill = 0.0);
	// Takes ownership of `data`; rejects size mismatch and non-finite entries.
	Tensor(Shape shape, std::vector<double> data);

	static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
	static Tensor identity(std::size_t n);
	static Tensor from_rows(const std::vector<std::vector<double>>& rows);

	const Shape& shape() const noexcept { return shape_; }
	std::size_t rank() const noexcept { return shape_.size(); }
	std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
	std::size_t size() const noexcept { return data_.size(); }
	bool empty() const noexcept { return data_.empty(); }

	std::span<double> data() noexcept { return data_; }
	std::span<const double> data() const noexcept { return data_; }
	std::vector<double>& storage() noexcept { return data_; }
	const std::vector<double>& storage() const noexcept { return data_; }

	double& operator[](std::size_t i) noexcept { return data_[i]; }
	double operator[](std::size_t i) const noexcept { return data_[i]; }

	double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
	double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }
	double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
		return data_[(i * shape_[1] + j) * shape_[2] + k];
	}
	double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
		return data_[(i * shape_[1] + j) * shape_[2] + k];
	}

	Tensor reshaped(Shape shape) const;
	Tensor transposed() const;  // rank 2 only

	void fill(double v);
	bool all_finite() const noexcept;
	double max_abs() const noexcept;

	friend bool operator==(const Tensor&, const Tensor&) = default;

private:
	Shape shape_;
	std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace gtc
