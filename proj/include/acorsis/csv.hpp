#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "acorsis/dataset.hpp"
#include "acorsis/errors.hpp"

namespace acorsis {

/// Comma-separated numeric table: header row required, '.' decimal point,
/// no quoting, no missing cells. Values parse and print locale-free.
struct CsvTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    int rows = 0;

    int cols() const { return static_cast<int>(names.size()); }
    int find(const std::string& name) const {
        for (int j = 0; j < cols(); ++j)
            if (names[j] == name) return j;
        return -1;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline void split_fields(const std::string& line, std::vector<std::string>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            return;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

} // namespace detail

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw csv_error("empty input: a header row is required");
    std::vector<std::string> fields;
    detail::split_fields(line, fields);
    if (fields.empty() || fields[0].empty()) throw csv_error("header row has an empty first field");
    for (const std::string& f : fields) {
        if (f.empty()) throw csv_error("header row has an empty column name");
        t.names.push_back(f);
    }
    t.columns.assign(t.names.size(), {});

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        detail::split_fields(line, fields);
        if (fields.size() != t.names.size())
            throw csv_error("line " + std::to_string(line_no) + ": expected " + std::to_string(t.names.size()) +
                            " fields, found " + std::to_string(fields.size()));
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string& f = fields[j];
            double value = 0.0;
            const char* first = f.data();
            const char* last = f.data() + f.size();
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last)
                throw csv_error("line " + std::to_string(line_no) + ", column '" + t.names[j] +
                                "': cannot parse '" + f + "' as a number (missing values are rejected)");
            t.columns[j].push_back(value);
        }
        ++t.rows;
    }
    if (t.rows == 0) throw csv_error("no data rows");
    return t;
}

inline void write_csv(std::ostream& os, const CsvTable& t) {
    for (int j = 0; j < t.cols(); ++j) os << (j ? "," : "") << t.names[j];
    os << '\n';
    char buf[64];
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t.columns[j][i]);
            (void)ec;
            os << (j ? "," : "") << std::string_view(buf, ptr - buf);
        }
        os << '\n';
    }
}

struct LoadedData {
    Dataset ds;
    std::vector<std::string> var_names; // aligned with ds variables 1..p
    std::string response_name;
};

/// Assemble a Dataset from a parsed table: the named response column plus
/// every other column as a design variable, file order preserved.
inline LoadedData dataset_from_csv(const CsvTable& t, const std::string& response, Family family) {
    const int yc = t.find(response);
    if (yc < 0) throw csv_error("response column '" + response + "' not found");
    if (t.cols() < 2) throw csv_error("need at least one design column besides the response");
    LoadedData out;
    out.response_name = response;
    const int p = t.cols() - 1;
    Matrix x(t.rows, p);
    int col = 0;
    for (int j = 0; j < t.cols(); ++j) {
        if (j == yc) continue;
        out.var_names.push_back(t.names[j]);
        for (int i = 0; i < t.rows; ++i) x.at(i, col) = t.columns[j][i];
        ++col;
    }
    std::vector<double> y = t.columns[yc];
    out.ds = standardize(std::move(y), std::move(x), family);
    return out;
}

} // namespace acorsis
