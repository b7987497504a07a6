#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace afex::csv {

struct Table {
    std::vector<std::string> header;  // empty when the file had none
    std::vector<std::vector<double>> rows;

    std::size_t cols() const { return rows.empty() ? header.size() : rows[0].size(); }
};

/// Numeric CSV: comma-separated doubles, '.' decimal separator, optional
/// single header row (detected by cells that do not parse as numbers).
/// Rows must all have the same width. Throws std::runtime_error on
/// malformed input.
Table read_numeric(std::istream& in, const std::string& origin = "<stream>");
Table read_numeric_file(const std::string& path);

/// One CSV line, no trailing newline. Shortest round-trip formatting.
std::string format_row(std::span<const double> values);

std::string format_double(double v);

}  // namespace afex::csv
