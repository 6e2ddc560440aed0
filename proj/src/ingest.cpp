#include <charconv>
#include <cmath>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/table.hpp"
#include "specfission/time_util.hpp"

namespace specfission {

namespace {

bool valid_utf8(const std::string& s) {
    size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        size_t extra;
        if (c < 0x80) extra = 0;
        else if ((c >> 5) == 0x6) extra = 1;
        else if ((c >> 4) == 0xe) extra = 2;
        else if ((c >> 3) == 0x1e) extra = 3;
        else return false;
        if (i + extra >= s.size() && extra > 0) return false;
        for (size_t k = 1; k <= extra; ++k)
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        i += extra + 1;
    }
    return true;
}

bool parse_int_cell(const std::string& s, int64_t& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool parse_float_cell(const std::string& s, double& out) {
    if (s.empty()) return false;
    // from_chars would accept "inf"/"nan"; those stay strings in data files.
    for (char c : s)
        if (std::isalpha(static_cast<unsigned char>(c)) && c != 'e' && c != 'E') return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(first, &end);
    return end == s.data() + s.size() && errno != ERANGE;
}

bool parse_bool_cell(const std::string& s, bool& out) {
    if (s == "true") {
        out = true;
        return true;
    }
    if (s == "false") {
        out = false;
        return true;
    }
    return false;
}

struct TypeCandidates {
    bool can_bool = true;
    bool can_int = true;
    bool can_float = true;
    bool can_ts = true;
    size_t nonnull = 0;

    void observe(const std::string& cell) {
        ++nonnull;
        bool b;
        int64_t i;
        double d;
        if (can_bool && !parse_bool_cell(cell, b)) can_bool = false;
        if (can_int && !parse_int_cell(cell, i)) can_int = false;
        if (can_float && !parse_float_cell(cell, d)) can_float = false;
        if (can_ts && !parse_iso8601(cell)) can_ts = false;
    }

    DataType resolve() const {
        if (nonnull == 0) return DataType::String; // all-null column
        if (can_bool) return DataType::Bool;
        if (can_int) return DataType::Int64;
        if (can_ts) return DataType::Timestamp;
        if (can_float) return DataType::Float64;
        return DataType::String;
    }
};

Value convert_cell(const std::string& cell, DataType type) {
    switch (type) {
    case DataType::Bool: {
        bool b;
        parse_bool_cell(cell, b);
        return Value(b);
    }
    case DataType::Int64: {
        int64_t i = 0;
        parse_int_cell(cell, i);
        return Value(i);
    }
    case DataType::Float64: {
        double d = 0;
        parse_float_cell(cell, d);
        return Value(d);
    }
    case DataType::Timestamp: return Value(Timestamp{*parse_iso8601(cell)});
    case DataType::String: return Value(cell);
    }
    return Value();
}

std::vector<std::vector<std::string>> split_csv(const std::string& text, char delimiter) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    size_t i = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_has_content = false;
    };
    while (i < text.size()) {
        char c = text[i];
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
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
            row_has_content = true;
        } else if (c == delimiter) {
            end_field();
            row_has_content = true;
        } else if (c == '\n') {
            if (row_has_content || !field.empty() || !row.empty()) end_row();
        } else if (c == '\r') {
            // swallowed; \r\n handled by the \n branch
        } else {
            field.push_back(c);
            row_has_content = true;
        }
        ++i;
    }
    if (in_quotes) throw Error(ErrorCode::MalformedDocument, "unterminated quoted field");
    if (row_has_content || !field.empty() || !row.empty()) end_row();
    return rows;
}

} // namespace

Table ingest_csv(const std::string& bytes, const CsvOptions& options) {
    if (!valid_utf8(bytes)) throw Error(ErrorCode::BadUtf8, "input is not valid UTF-8");
    auto rows = split_csv(bytes, options.delimiter);
    if (rows.empty()) return Table();

    std::vector<std::string> names;
    size_t first_data_row = 0;
    if (options.header) {
        names = rows[0];
        first_data_row = 1;
    } else {
        for (size_t i = 0; i < rows[0].size(); ++i) names.push_back("c" + std::to_string(i));
    }
    size_t ncols = names.size();
    size_t ndata = rows.size() - first_data_row;

    std::vector<TypeCandidates> cand(ncols);
    for (size_t r = first_data_row; r < rows.size(); ++r) {
        if (rows[r].size() != ncols)
            throw Error(ErrorCode::RaggedRow,
                        "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                            " fields, expected " + std::to_string(ncols));
        for (size_t c = 0; c < ncols; ++c)
            if (!rows[r][c].empty()) cand[c].observe(rows[r][c]);
    }

    std::vector<Column> cols;
    cols.reserve(ncols);
    for (size_t c = 0; c < ncols; ++c) {
        DataType type = cand[c].resolve();
        Column col = Column::make(names[c], type);
        for (size_t r = first_data_row; r < rows.size(); ++r) {
            const std::string& cell = rows[r][c];
            if (cell.empty()) col.push_null();
            else col.push(convert_cell(cell, type));
        }
        cols.push_back(std::move(col));
    }
    return Table(std::move(cols), ndata);
}

Table table_from_json_rows(const nlohmann::json& rows) {
    if (!rows.is_array())
        throw Error(ErrorCode::NotAnArray, "JSON dataset must be an array of objects");

    std::vector<std::string> names;
    std::vector<std::vector<Value>> cells; // per column, aligned with names
    auto col_of = [&](const std::string& key, size_t backfill) -> size_t {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == key) return i;
        names.push_back(key);
        cells.emplace_back(backfill); // rows before the key appeared are null
        return names.size() - 1;
    };

    size_t nrows = 0;
    for (const auto& obj : rows) {
        if (!obj.is_object())
            throw Error(ErrorCode::NotAnArray, "JSON dataset rows must be objects");
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (it.value().is_object() || it.value().is_array())
                throw Error(ErrorCode::NestedValue,
                            "nested value under key '" + it.key() + "'");
            size_t c = col_of(it.key(), nrows);
            cells[c].push_back(value_from_json(it.value()));
        }
        ++nrows;
        for (auto& col : cells) col.resize(nrows); // missing keys become null
    }

    // Same inference lattice as CSV, applied to the typed values.
    std::vector<Column> cols;
    for (size_t c = 0; c < names.size(); ++c) {
        bool can_bool = true, can_int = true, can_float = true, can_ts = true;
        size_t nonnull = 0;
        for (const auto& v : cells[c]) {
            if (v.is_null()) continue;
            ++nonnull;
            can_bool = can_bool && v.is_bool();
            can_int = can_int && v.is_int();
            can_float = can_float && v.is_number();
            can_ts = can_ts && v.is_string() && parse_iso8601(v.as_string()).has_value();
        }
        DataType type;
        if (nonnull == 0) type = DataType::String;
        else if (can_bool) type = DataType::Bool;
        else if (can_int) type = DataType::Int64;
        else if (can_ts) type = DataType::Timestamp;
        else if (can_float) type = DataType::Float64;
        else type = DataType::String;

        Column col = Column::make(names[c], type);
        for (const auto& v : cells[c]) {
            if (v.is_null()) {
                col.push_null();
            } else if (type == DataType::Timestamp) {
                col.push(Value(Timestamp{*parse_iso8601(v.as_string())}));
            } else if (type == DataType::Float64 && v.is_int()) {
                col.push(Value(static_cast<double>(v.as_int())));
            } else if (type == DataType::String && !v.is_string()) {
                col.push(Value(value_to_string(v)));
            } else {
                col.push(v);
            }
        }
        cols.push_back(std::move(col));
    }
    return Table(std::move(cols), nrows);
}

Table ingest_json(const std::string& bytes) {
    if (!valid_utf8(bytes)) throw Error(ErrorCode::BadUtf8, "input is not valid UTF-8");
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedDocument, "invalid JSON");
    return table_from_json_rows(j);
}

} // namespace specfission
