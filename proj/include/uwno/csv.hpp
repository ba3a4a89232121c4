#pragma once

// Minimal CSV helpers: numeric tables with a single header row. Doubles are
// written with %.17g so a read-back is bit-exact.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uwno/errors.hpp"

namespace uwno {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t cols() const { return header.size(); }
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_to_string(const CsvTable& t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_double(row[i]);
        os << "\n";
    }
    return os.str();
}

inline void write_csv(const std::string& path, const CsvTable& t) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << csv_to_string(t);
    if (!f) throw IoError("write failed for '" + path + "'");
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw ValueError("csv '" + path + "' is empty");
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ValueError("csv '" + path + "' line " + std::to_string(lineno) +
                                 ": cannot parse '" + cell + "' as a number");
            }
        }
        if (row.size() != t.header.size())
            throw ValueError("csv '" + path + "' line " + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " columns, got " +
                             std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace uwno
