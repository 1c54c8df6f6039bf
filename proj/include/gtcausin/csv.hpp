#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gtc::csv {

// Plain comma-separated fields; quoting is not supported.
std::vector<std::string> split(std::string_view line);
std::string join(const std::vector<std::string>& fields);

std::optional<double> parse_double(std::string_view s);
// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Lines of a text file with trailing '\r' removed; blank lines dropped.
std::vector<std::string> read_lines(const std::string& path);
void write_text(const std::string& path, const std::string& content);

} // namespace gtc::csv
