#include "gtcausin/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gtcausin/error.hpp"

namespace gtc::csv {

std::vector<std::string> split(std::string_view line) {
	std::vector<std::string> out;
	std::size_t start = 0;
	while (true) {
		const auto pos = line.find(',', start);
		if (pos == std::string_view::npos) {
			out.emplace_back(line.substr(start));
			break;
		}
		out.emplace_back(line.substr(start, pos - start));
		start = pos + 1;
	}
	for (auto& f : out) {
		const auto b = f.find_first_not_of(" \t");
		const auto e = f.find_last_not_of(" \t");
		f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
	}
	return out;
}

std::string join(const std::vector<std::string>& fields) {
	std::string s;
	for (std::size_t i = 0; i < fields.size(); ++i) {
		if (i) {
			s += ',';
		}
		s += fields[i];
	}
	return s;
}

std::optional<double> parse_double(std::string_view s) {
	if (s.empty()) {
		return std::nullopt;
	}
	if (s.front() == '+') {
		s.remove_prefix(1);
	}
	double v = 0.0;
	const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
	if (ec != std::errc() || ptr != s.data() + s.size()) {
		return std::nullopt;
	}
	return v;
}

std::string format_double(double v) {
	char buf[64];
	const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
	if (ec != std::errc()) {
		throw NumericError("failed to format double");
	}
	return std::string(buf, ptr);
}

std::vector<std::string> read_lines(const std::string& path) {
	std::ifstream in(path);
	if (!in) {
		throw InputError("cannot open '" + path + "'");
	}
	std::vector<std::string> lines;
	std::string line;
	while (std::getline(in, line)) {
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (line.find_first_not_of(" \t") == std::string::npos) {
			continue;
		}
		lines.push_back(std::move(line));
	}
	return lines;
}

void write_text(const std::string& path, const std::string& content) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw DataError("cannot open '" + path + "' for writing");
	}
	out << content;
	if (!out) {
		throw DataError("failed writing '" + path + "'");
	}
}

} // namespace gtc::csv
