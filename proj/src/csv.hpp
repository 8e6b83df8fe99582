#pragma once
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "zspacing/errors.hpp"

// Small shared helpers for the CSV-based formats.  Internal to src/.
namespace zspacing::csv {

// Reads a whole text file as lines; strips CR from CRLF endings and drops
// the empty fragment after a trailing newline.  `op` names the calling
// operation for error messages.
inline std::vector<std::string> read_lines(const std::string& path, const std::string& op) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error(op + ": cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (auto& line : lines)
        if (!line.empty() && line.back() == '\r') line.pop_back();
    return lines;
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find(',', start);
        if (end == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, end - start));
        start = end + 1;
    }
}

inline std::string trim(const std::string& field) {
    std::size_t a = 0, b = field.size();
    while (a < b && (field[a] == ' ' || field[a] == '\t')) ++a;
    while (b > a && (field[b - 1] == ' ' || field[b - 1] == '\t')) --b;
    return field.substr(a, b - a);
}

// Strict full-token double parse; `where` names the cell for the error.
inline double parse_double(const std::string& field, const std::string& where) {
    const std::string t = trim(field);
    if (t.empty()) throw data_error(where + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
        throw data_error(where + ": cannot parse '" + t + "' as a number");
    return v;
}

// Strict full-token non-negative integer parse.
inline long parse_index(const std::string& field, const std::string& where) {
    const std::string t = trim(field);
    if (t.empty()) throw data_error(where + ": empty index field");
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || v < 0)
        throw data_error(where + ": cannot parse '" + t + "' as an index");
    return v;
}

} // namespace zspacing::csv
