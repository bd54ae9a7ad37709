#pragma once

#include <annolab/error.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace annolab::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain delimiters, quotes ("") and
// newlines. CRLF and LF line endings are both accepted; blank lines are skipped.
inline std::vector<Row> parse(std::string_view text, char delimiter = ',') {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delimiter) {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) fail(ErrorKind::InvalidArgument, "unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

inline std::string quote(std::string_view field, char delimiter = ',') {
    const bool needs = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string join_row(const Row& row, char delimiter = ',') {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(delimiter);
        out += quote(row[i], delimiter);
    }
    return out;
}

// Maps header names to column positions; missing required columns are an error.
class Header {
public:
    explicit Header(const Row& names) : names_(names) {}

    std::size_t require(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        fail(ErrorKind::InvalidManifest, "missing column '" + std::string(name) + "'");
    }

    std::ptrdiff_t find(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }

private:
    Row names_;
};

} // namespace annolab::csv
