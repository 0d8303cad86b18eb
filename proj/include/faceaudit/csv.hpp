#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "faceaudit/error.hpp"

namespace faceaudit::csv {

using Row = std::vector<std::string>;

// RFC 4180 style: fields may be double-quoted, "" escapes a quote inside.
// Quoted fields spanning lines are not supported.
inline Row split_line(std::string_view line, std::size_t line_no) {
    Row fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw FormatError("line " + std::to_string(line_no) + ": unterminated quoted field");
    fields.push_back(std::move(field));
    return fields;
}

struct Table {
    Row header;
    std::vector<Row> rows;
    std::vector<std::size_t> line_numbers;
};

/// Reads a CSV whose header must equal `expected_header` exactly (after
/// stripping a UTF-8 BOM). Blank lines are skipped; every row must have as
/// many fields as the header.
inline Table read(const std::filesystem::path& path, const Row& expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.empty()) continue;
        Row fields = split_line(line, line_no);
        if (!have_header) {
            if (fields != expected_header) {
                std::string want;
                for (std::size_t i = 0; i < expected_header.size(); ++i)
                    want += (i ? "," : "") + expected_header[i];
                throw FormatError(path.string() + ": expected header '" + want + "', got '" + line + "'");
            }
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw FormatError(path.string() + ": empty file");
    return table;
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

inline std::string join(const Row& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += escape(fields[i]);
    }
    line += '\n';
    return line;
}

} // namespace faceaudit::csv
