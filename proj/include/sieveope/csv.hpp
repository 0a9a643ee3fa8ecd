#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sieveope::csv {

/// General format at 17 significant digits; round-trips exactly.
std::string format_double(double x);

std::vector<std::string> split_line(std::string_view line);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

/// Writes `contents` to a sibling temporary file and renames it over `path`.
void write_file_atomically(const std::string& path, const std::string& contents);

}  // namespace sieveope::csv
