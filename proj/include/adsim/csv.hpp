#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adsim/errors.hpp"

namespace adsim {

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// String-celled table with a header row. Empty cells encode MISSING.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw SchemaMismatch("no column named '" + std::string(name) + "'");
    }

    bool has_column(std::string_view name) const {
        for (const auto& c : columns) {
            if (c == name) return true;
        }
        return false;
    }
};

namespace detail {

inline bool needs_quoting(std::string_view field) {
    return field.find_first_of(",\"\n\r") != std::string_view::npos;
}

inline void write_field(std::string& out, std::string_view field) {
    if (!needs_quoting(field)) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

// Splits one physical CSV record. Quoted fields may contain commas and
// doubled quotes; embedded newlines are not supported (none of our formats
// produce them).
inline std::vector<std::string> split_record(const std::string& line) {
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
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace detail

inline std::string to_csv_string(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out.push_back(',');
        detail::write_field(out, table.columns[i]);
    }
    out.push_back('\n');
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            detail::write_field(out, row[i]);
        }
        out.push_back('\n');
    }
    return out;
}

inline void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << to_csv_string(table);
    if (!out) throw IoError("short write to '" + path + "'");
}

inline CsvTable read_csv_string(std::istream& in) {
    CsvTable table;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == EOF) break;
        auto fields = detail::split_record(line);
        if (header) {
            table.columns = std::move(fields);
            header = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (header) throw IoError("empty CSV input (no header row)");
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return read_csv_string(in);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to '" + path + "'");
}

// FNV-1a, used for content checksums in provenance records.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

inline std::string hash_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return std::string(buf);
}

}  // namespace adsim
