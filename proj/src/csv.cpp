#include "afex/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string_view>
#include <system_error>

namespace afex::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

bool parse_double(std::string_view cell, double& out) {
    cell = trim(cell);
    if (cell.empty()) return false;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

Table read_numeric(std::istream& in, const std::string& origin) {
    Table table;
    std::string line;
    std::size_t lineno = 0;
    bool first_content_row = true;

    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;

        const auto fields = split_fields(line);
        std::vector<double> row(fields.size());
        bool all_numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!parse_double(fields[i], row[i])) {
                all_numeric = false;
                break;
            }
        }

        if (!all_numeric) {
            if (first_content_row) {
                for (const auto f : fields) table.header.emplace_back(trim(f));
                first_content_row = false;
                continue;
            }
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": non-numeric cell in data row");
        }
        first_content_row = false;

        if (!table.rows.empty() && row.size() != table.rows[0].size()) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": inconsistent column count");
        }
        if (!table.header.empty() && row.size() != table.header.size()) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": column count differs from header");
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table read_numeric_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    return read_numeric(in, path);
}

std::string format_double(double v) {
    char buf[48];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

std::string format_row(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace afex::csv
