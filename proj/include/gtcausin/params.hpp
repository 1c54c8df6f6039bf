#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gtcausin/tensor.hpp"

namespace gtc {

// Named trainable tensors with gradient slots. Names are hierarchical paths
// such as "block2/tcn/theta"; iteration order is lexicographic by name.
class ParamStore {
public:
	struct Entry {
		Tensor value;
		Tensor grad;
	};

	Tensor& add(const std::string& name, Tensor init);
	bool contains(const std::string& name) const { return entries_.count(name) != 0; }
	Entry& at(const std::string& name);
	const Entry& at(const std::string& name) const;

	std::map<std::string, Entry>& entries() noexcept { return entries_; }
	const std::map<std::string, Entry>& entries() const noexcept { return entries_; }
	std::vector<std::string> names() const;

	void zero_grads();
	std::size_t parameter_count() const;

	std::vector<double> flat_values() const;
	std::vector<double> flat_grads() const;
	void set_flat_values(std::span<const double> values);

	friend bool operator==(const ParamStore& a, const ParamStore& b);

private:
	std::map<std::string, Entry> entries_;
};

// Checkpoint container, version 1. All integers and doubles little-endian.
//
//   bytes 0..7   magic "GTCPARAM"
//   u32          format version (1)
//   u64          metadata length, followed by that many bytes of UTF-8 JSON
//   u64          entry count
//   per entry:   u32 name length, name bytes, u32 rank, u64 dims[rank],
//                f64 values[prod(dims)] in row-major order
//
// Gradients are not stored. Loading restores values bit-exactly.
constexpr std::uint32_t kCheckpointVersion = 1;

void write_params(std::ostream& os, const ParamStore& store, const std::string& metadata);
ParamStore read_params(std::istream& is, std::string* metadata = nullptr);
void save_params(const std::string& path, const ParamStore& store, const std::string& metadata);
ParamStore load_params(const std::string& path, std::string* metadata = nullptr);

} // namespace gtc
