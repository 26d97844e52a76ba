#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "vitals/error.hpp"

namespace vitals {

// Minimal CSV support for the dataset format: UTF-8, LF endings, '.' decimal
// point, no quoting. Writers use std::to_chars so output is locale-free and
// byte-reproducible.

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

// Rows of a two-column CSV with the given header. Row numbers in errors are
// 1-based file line numbers (header is line 1).
inline std::vector<std::pair<std::int64_t, double>> read_two_column_csv(
    const std::filesystem::path& path, const std::string& expected_header) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Format, "cannot open CSV file " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format,
            "empty CSV file " + path.string());
    require(strip_cr(line) == expected_header, ErrorKind::Format,
            path.string() + ": expected header '" + expected_header + "'");
    std::vector<std::pair<std::int64_t, double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        require(fields.size() == 2, ErrorKind::Format,
                path.string() + ": row " + std::to_string(line_no) + " has " +
                    std::to_string(fields.size()) + " fields, expected 2");
        std::int64_t key = 0;
        auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), key);
        require(r1.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size(),
                ErrorKind::Format,
                path.string() + ": row " + std::to_string(line_no) + ": bad integer '" +
                    fields[0] + "'");
        double value = 0.0;
        auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), value);
        require(r2.ec == std::errc() && r2.ptr == fields[1].data() + fields[1].size(),
                ErrorKind::Format,
                path.string() + ": row " + std::to_string(line_no) + ": bad number '" +
                    fields[1] + "'");
        rows.emplace_back(key, value);
    }
    return rows;
}

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        require(out_.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void flush_and_check(const std::string& what) {
        out_.flush();
        require(out_.good(), ErrorKind::Io, "write failed for " + what);
    }

private:
    std::ofstream out_;
};

} // namespace vitals
