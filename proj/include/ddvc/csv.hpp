#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddvc/errors.hpp"

namespace ddvc::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

/// Reads a header + numeric rows file. Blank lines are skipped.
inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty()) continue;
        if (!have_header) {
            t.header = split(s);
            have_header = true;
            continue;
        }
        const auto fields = split(s);
        if (fields.size() != t.header.size())
            throw SchemaError(path + ":" + std::to_string(lineno) +
                              ": expected " + std::to_string(t.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(f, &pos);
                if (pos != f.size())
                    throw std::invalid_argument("trailing characters");
                row.push_back(v);
            } catch (const std::exception&) {
                throw SchemaError(path + ":" + std::to_string(lineno) +
                                  ": non-numeric field '" + f + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw SchemaError(path + ": empty file");
    return t;
}

/// Formats a double with enough digits to round-trip exactly.
inline std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write(const std::string& path, const Table& t) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (i) out << ',';
        out << t.header[i];
    }
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format(row[i]);
        }
        out << '\n';
    }
}

} // namespace ddvc::csv
