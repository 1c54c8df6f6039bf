#pragma once

#include <stdexcept>
#include <string>

namespace gtc {

// Malformed or inconsistent caller input (shapes, ids, file contents).
class InputError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

// Data that is well-formed but unusable (no observations, empty splits).
class DataError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// Non-finite values or divergence during computation.
class NumericError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
	if (!cond) {
		throw InputError(what);
	}
}

} // namespace gtc
