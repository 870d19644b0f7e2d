#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deepwait/error.hpp"

namespace deepwait {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return header.size(); }

    int column_index(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    }
};

namespace detail {

// Splits one CSV line. Supports double-quoted fields with embedded commas
// and doubled quotes; embedded newlines are not supported.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted)
        throw IoError("line " + std::to_string(line_no) + ": unterminated quoted field");
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.empty())
            throw IoError("'" + path.string() + "': missing header row");
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line, line_no);
        if (line_no == 1) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size())
                throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                              ": expected " + std::to_string(table.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty())
        throw IoError("'" + path.string() + "': empty file, header row required");
    return table;
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t j = 0; j < header.size(); ++j)
        out << (j ? "," : "") << csv_quote(header[j]);
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j)
            out << (j ? "," : "") << csv_quote(row[j]);
        out << "\n";
    }
    if (!out)
        throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace deepwait
