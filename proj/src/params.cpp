#include "gtcausin/params.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "gtcausin/error.hpp"

namespace gtc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Tensor& ParamStore::add(const std::string& name, Tensor init) {
	require(!name.empty(), "parameter name must not be empty");
	require(!contains(name), "duplicate parameter '" + name + "'");
	Tensor grad(init.shape());
	auto [it, _] = entries_.emplace(name, Entry{std::move(init), std::move(grad)});
	return it->second.value;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
	auto it = entries_.find(name);
	if (it == entries_.end()) {
		throw InputError("unknown parameter '" + name + "'");
	}
	return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
	auto it = entries_.find(name);
	if (it == entries_.end()) {
		throw InputError("unknown parameter '" + name + "'");
	}
	return it->second;
}

std::vector<std::string> ParamStore::names() const {
	std::vector<std::string> out;
	out.reserve(entries_.size());
	for (const auto& [name, _] : entries_) {
		out.push_back(name);
	}
	return out;
}

void ParamStore::zero_grads() {
	for (auto& [_, e] : entries_) {
		e.grad.fill(0.0);
	}
}

std::size_t ParamStore::parameter_count() const {
	std::size_t n = 0;
	for (const auto& [_, e] : entries_) {
		n += e.value.size();
	}
	return n;
}

std::vector<double> ParamStore::flat_values() const {
	std::vector<double> out;
	out.reserve(parameter_count());
	for (const auto& [_, e] : entries_) {
		out.insert(out.end(), e.value.data().begin(), e.value.data().end());
	}
	return out;
}

std::vector<double> ParamStore::flat_grads() const {
	std::vector<double> out;
	out.reserve(parameter_count());
	for (const auto& [_, e] : entries_) {
		out.insert(out.end(), e.grad.data().begin(), e.grad.data().end());
	}
	return out;
}

void ParamStore::set_flat_values(std::span<const double> values) {
	require(values.size() == parameter_count(), "set_flat_values: length mismatch");
	std::size_t off = 0;
	for (auto& [_, e] : entries_) {
		std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), e.value.size(), e.value.data().begin());
		off += e.value.size();
	}
}

bool operator==(const ParamStore& a, const ParamStore& b) {
	if (a.entries_.size() != b.entries_.size()) {
		return false;
	}
	auto ib = b.entries_.begin();
	for (const auto& [name, e] : a.entries_) {
		if (name != ib->first || !(e.value == ib->second.value)) {
			return false;
		}
		++ib;
	}
	return true;
}

namespace {

constexpr char kMagic[8] = {'G', 'T', 'C', 'P', 'A', 'R', 'A', 'M'};

template <class T>
void put(std::ostream& os, T v) {
	os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
	T v{};
	is.read(reinterpret_cast<char*>(&v), sizeof(T));
	if (!is) {
		throw InputError("checkpoint truncated");
	}
	return v;
}

std::string get_string(std::istream& is, std::size_t n) {
	// Guard against absurd lengths from corrupt files before allocating.
	if (n > (std::size_t{1} << 32)) {
		throw InputError("checkpoint string length out of range");
	}
	std::string s(n, '\0');
	is.read(s.data(), static_cast<std::streamsize>(n));
	if (!is) {
		throw InputError("checkpoint truncated");
	}
	return s;
}

} // namespace

void write_params(std::ostream& os, const ParamStore& store, const std::string& metadata) {
	os.write(kMagic, sizeof(kMagic));
	put<std::uint32_t>(os, kCheckpointVersion);
	put<std::uint64_t>(os, metadata.size());
	os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
	put<std::uint64_t>(os, store.entries().size());
	for (const auto& [name, e] : store.entries()) {
		put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
		os.write(name.data(), static_cast<std::streamsize>(name.size()));
		put<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
		for (auto d : e.value.shape()) {
			put<std::uint64_t>(os, d);
		}
		os.write(reinterpret_cast<const char*>(e.value.data().data()),
		         static_cast<std::streamsize>(e.value.size() * sizeof(double)));
	}
}

ParamStore read_params(std::istream& is, std::string* metadata) {
	char magic[sizeof(kMagic)];
	is.read(magic, sizeof(magic));
	if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
		throw InputError("not a parameter checkpoint (bad magic)");
	}
	const auto version = get<std::uint32_t>(is);
	if (version != kCheckpointVersion) {
		throw InputError("unsupported checkpoint version " + std::to_string(version));
	}
	std::string meta = get_string(is, get<std::uint64_t>(is));
	if (metadata) {
		*metadata = std::move(meta);
	}
	ParamStore store;
	const auto count = get<std::uint64_t>(is);
	for (std::uint64_t i = 0; i < count; ++i) {
		std::string name = get_string(is, get<std::uint32_t>(is));
		const auto rank = get<std::uint32_t>(is);
		if (rank > 8) {
			throw InputError("checkpoint entry '" + name + "' has implausible rank");
		}
		Shape shape(rank);
		for (auto& d : shape) {
			d = get<std::uint64_t>(is);
		}
		std::vector<double> data(shape_size(shape));
		is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
		if (!is) {
			throw InputError("checkpoint truncated in entry '" + name + "'");
		}
		store.add(name, Tensor(std::move(shape), std::move(data)));
	}
	return store;
}

void save_params(const std::string& path, const ParamStore& store, const std::string& metadata) {
	std::ofstream os(path, std::ios::binary);
	if (!os) {
		throw DataError("cannot open '" + path + "' for writing");
	}
	write_params(os, store, metadata);
	if (!os) {
		throw DataError("failed writing checkpoint '" + path + "'");
	}
}

ParamStore load_params(const std::string& path, std::string* metadata) {
	std::ifstream is(path, std::ios::binary);
	if (!is) {
		throw InputError("cannot open checkpoint '" + path + "'");
	}
	return read_params(is, metadata);
}

} // namespace gtc
