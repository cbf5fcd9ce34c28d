#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace indexsize::csv {

using Row = std::vector<std::string>;

/// RFC 4180 style reader: comma separated, double-quoted fields may contain
/// commas, quotes ("") and newlines. Returns rows with their 1-based line
/// number of the first physical line.
struct NumberedRow {
    std::size_t line = 0;
    Row fields;
};

std::vector<NumberedRow> read(std::istream& in);
std::vector<NumberedRow> read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

/// Strips thousands separators ("1,234") and parses a non-negative or
/// negative integer. Throws std::invalid_argument on anything else.
long long parse_count(std::string_view text);

std::string trim(std::string_view s);

}  // namespace indexsize::csv
