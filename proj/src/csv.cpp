#include "indexsize/csv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace indexsize::csv {

std::vector<NumberedRow> read(std::istream& in) {
    std::vector<NumberedRow> rows;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    NumberedRow current;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;
    current.line = 1;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        if (row_has_content) rows.push_back(std::move(current));
        current = NumberedRow{};
        row_has_content = false;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            row_has_content = true;
            break;
        case ',':
            row_has_content = true;
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            end_row();
            ++line;
            current.line = line;
            break;
        default:
            row_has_content = true;
            field.push_back(c);
        }
    }
    if (in_quotes) throw std::runtime_error("unterminated quoted field starting near line " + std::to_string(current.line));
    if (row_has_content || !field.empty()) end_row();
    return rows;
}

std::vector<NumberedRow> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read(in);
}

std::string escape(std::string_view field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << escape(row[i]);
    }
    out << '\n';
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

long long parse_count(std::string_view text) {
    std::string digits;
    for (char c : trim(text)) {
        if (c == ',' || c == '_') continue;
        digits.push_back(c);
    }
    if (digits.empty()) throw std::invalid_argument("empty count");
    long long value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
        throw std::invalid_argument("not an integer count: '" + std::string(text) + "'");
    return value;
}

}  // namespace indexsize::csv
