#include "specfission/table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"

namespace specfission {

const char* data_type_name(DataType t) {
    switch (t) {
    case DataType::Bool: return "bool";
    case DataType::Int64: return "i64";
    case DataType::Float64: return "f64";
    case DataType::String: return "str";
    case DataType::Timestamp: return "ts";
    }
    return "?";
}

std::optional<DataType> data_type_from_name(const std::string& name) {
    if (name == "bool") return DataType::Bool;
    if (name == "i64") return DataType::Int64;
    if (name == "f64") return DataType::Float64;
    if (name == "str") return DataType::String;
    if (name == "ts") return DataType::Timestamp;
    return std::nullopt;
}

Value Column::get(size_t row) const {
    if (is_null(row)) return Value();
    switch (type) {
    case DataType::Bool: return Value(bools()[row] != 0);
    case DataType::Int64: return Value(ints()[row]);
    case DataType::Float64: return Value(floats()[row]);
    case DataType::String: return Value(strings()[row]);
    case DataType::Timestamp: return Value(Timestamp{ints()[row]});
    }
    return Value();
}

double Column::as_double(size_t row) const {
    switch (type) {
    case DataType::Int64:
    case DataType::Timestamp: return static_cast<double>(ints()[row]);
    case DataType::Float64: return floats()[row];
    default: throw Error(ErrorCode::NonNumericField, "column '" + name + "' is not numeric");
    }
}

Column Column::make(std::string name, DataType type, size_t nrows) {
    Column c;
    c.name = std::move(name);
    c.type = type;
    switch (type) {
    case DataType::Bool: c.data = std::vector<uint8_t>(nrows, 0); break;
    case DataType::Int64:
    case DataType::Timestamp: c.data = std::vector<int64_t>(nrows, 0); break;
    case DataType::Float64: c.data = std::vector<double>(nrows, 0.0); break;
    case DataType::String: c.data = std::vector<std::string>(nrows); break;
    }
    c.validity.assign(nrows, 0);
    return c;
}

void Column::push_null() {
    std::visit([](auto& v) { v.emplace_back(); }, data);
    validity.push_back(0);
}

void Column::push(const Value& v) {
    if (v.is_null()) {
        push_null();
        return;
    }
    switch (type) {
    case DataType::Bool:
        if (!v.is_bool()) throw Error(ErrorCode::TypeError, "expected bool cell");
        std::get<0>(data).push_back(v.as_bool() ? 1 : 0);
        break;
    case DataType::Int64:
        if (!v.is_int()) throw Error(ErrorCode::TypeError, "expected int cell");
        std::get<1>(data).push_back(v.as_int());
        break;
    case DataType::Timestamp:
        if (!v.is_timestamp()) throw Error(ErrorCode::TypeError, "expected timestamp cell");
        std::get<1>(data).push_back(v.as_timestamp().ms);
        break;
    case DataType::Float64:
        if (!v.is_number()) throw Error(ErrorCode::TypeError, "expected numeric cell");
        std::get<2>(data).push_back(v.number_as_double());
        break;
    case DataType::String:
        if (!v.is_string()) throw Error(ErrorCode::TypeError, "expected string cell");
        std::get<3>(data).push_back(v.as_string());
        break;
    }
    validity.push_back(1);
}

void Column::push_from(const Column& src, size_t row) {
    if (src.is_null(row)) {
        push_null();
        return;
    }
    std::visit(
        [&](auto& dst) {
            using V = std::decay_t<decltype(dst)>;
            dst.push_back(std::get<V>(src.data)[row]);
        },
        data);
    validity.push_back(1);
}

Table::Table(std::vector<Column> columns, size_t nrows)
    : columns_(std::move(columns)), nrows_(nrows) {
    for (const auto& c : columns_) {
        if (c.size() != nrows_)
            throw Error(ErrorCode::InvariantViolation,
                        "column '" + c.name + "' length mismatch");
    }
}

const Column* Table::find_column(const std::string& name) const {
    for (const auto& c : columns_)
        if (c.name == name) return &c;
    return nullptr;
}

const Column& Table::require_column(const std::string& name) const {
    const Column* c = find_column(name);
    if (!c) throw Error(ErrorCode::UnknownField, "unknown field '" + name + "'");
    return *c;
}

int Table::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return static_cast<int>(i);
    return -1;
}

Value Table::cell(size_t row, const std::string& column) const {
    return require_column(column).get(row);
}

bool Table::operator==(const Table& other) const {
    if (nrows_ != other.nrows_ || columns_.size() != other.columns_.size()) return false;
    for (size_t i = 0; i < columns_.size(); ++i) {
        const Column& a = columns_[i];
        const Column& b = other.columns_[i];
        if (a.name != b.name || a.type != b.type) return false;
        for (size_t r = 0; r < nrows_; ++r) {
            if (a.is_null(r) != b.is_null(r)) return false;
            if (a.is_null(r)) continue;
            Value va = a.get(r), vb = b.get(r);
            if (va.is_float() && vb.is_float() && std::isnan(va.as_float()) &&
                std::isnan(vb.as_float()))
                continue;
            if (!(va == vb)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

nlohmann::json cell_to_json(const Column& c, size_t row) {
    if (c.is_null(row)) return nullptr;
    switch (c.type) {
    case DataType::Bool: return c.bools()[row] != 0;
    case DataType::Int64:
    case DataType::Timestamp: return c.ints()[row];
    case DataType::Float64: {
        double d = c.floats()[row];
        if (std::isnan(d)) return "NaN";
        if (std::isinf(d)) return d > 0 ? "Infinity" : "-Infinity";
        return d;
    }
    case DataType::String: return c.strings()[row];
    }
    return nullptr;
}

Value cell_from_json(DataType type, const nlohmann::json& j) {
    if (j.is_null()) return Value();
    switch (type) {
    case DataType::Bool:
        if (!j.is_boolean()) throw Error(ErrorCode::MalformedDocument, "expected bool cell");
        return Value(j.get<bool>());
    case DataType::Int64:
        if (!j.is_number_integer() && !j.is_number_unsigned())
            throw Error(ErrorCode::MalformedDocument, "expected integer cell");
        return Value(j.get<int64_t>());
    case DataType::Timestamp:
        if (!j.is_number_integer() && !j.is_number_unsigned())
            throw Error(ErrorCode::MalformedDocument, "expected epoch-ms cell");
        return Value(Timestamp{j.get<int64_t>()});
    case DataType::Float64:
        if (j.is_string()) {
            const std::string& s = j.get_ref<const std::string&>();
            if (s == "NaN") return Value(std::nan(""));
            if (s == "Infinity") return Value(HUGE_VAL);
            if (s == "-Infinity") return Value(-HUGE_VAL);
            throw Error(ErrorCode::MalformedDocument, "bad float cell '" + s + "'");
        }
        if (!j.is_number()) throw Error(ErrorCode::MalformedDocument, "expected float cell");
        return Value(j.get<double>());
    case DataType::String:
        if (!j.is_string()) throw Error(ErrorCode::MalformedDocument, "expected string cell");
        return Value(j.get<std::string>());
    }
    return Value();
}

} // namespace

nlohmann::json table_to_json(const Table& t) {
    nlohmann::json schema = nlohmann::json::array();
    nlohmann::json columns = nlohmann::json::object();
    for (const auto& c : t.columns()) {
        schema.push_back({{"name", c.name}, {"type", data_type_name(c.type)}});
        nlohmann::json cells = nlohmann::json::array();
        for (size_t r = 0; r < t.nrows(); ++r) cells.push_back(cell_to_json(c, r));
        columns[c.name] = std::move(cells);
    }
    return {{"schema", std::move(schema)},
            {"nrows", t.nrows()},
            {"columns", std::move(columns)}};
}

std::string serialize_table(const Table& t) { return table_to_json(t).dump(); }

Table table_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema") || !j.contains("nrows") || !j.contains("columns"))
        throw Error(ErrorCode::MalformedDocument, "not a table document");
    size_t nrows = j.at("nrows").get<size_t>();
    std::vector<Column> cols;
    for (const auto& f : j.at("schema")) {
        std::string name = f.at("name").get<std::string>();
        auto type = data_type_from_name(f.at("type").get<std::string>());
        if (!type) throw Error(ErrorCode::MalformedDocument, "unknown column type");
        Column c = Column::make(name, *type);
        const nlohmann::json& cells = j.at("columns").at(name);
        if (cells.size() != nrows)
            throw Error(ErrorCode::MalformedDocument, "column length mismatch");
        for (const auto& cell : cells) c.push(cell_from_json(*type, cell));
        cols.push_back(std::move(c));
    }
    return Table(std::move(cols), nrows);
}

Table deserialize_table(const std::string& bytes) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedDocument, "invalid table JSON");
    return table_from_json(j);
}

nlohmann::json table_to_rows_json(const Table& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t r = 0; r < t.nrows(); ++r) {
        nlohmann::json row = nlohmann::json::object();
        for (const auto& c : t.columns()) row[c.name] = cell_to_json(c, r);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Row ordering helpers

std::vector<size_t> sorted_row_order(const Table& t,
                                     const std::vector<std::pair<std::string, bool>>& keys) {
    std::vector<size_t> order(t.nrows());
    std::iota(order.begin(), order.end(), 0);
    if (keys.empty()) return order;
    std::vector<std::pair<const Column*, bool>> cols;
    cols.reserve(keys.size());
    for (const auto& [name, asc] : keys) cols.emplace_back(&t.require_column(name), asc);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        for (const auto& [col, asc] : cols) {
            int c = canonical_compare(col->get(a), col->get(b));
            if (c != 0) return asc ? c < 0 : c > 0;
        }
        return false;
    });
    return order;
}

Table take_rows(const Table& t, const std::vector<size_t>& rows) {
    std::vector<Column> cols;
    cols.reserve(t.ncols());
    for (const auto& src : t.columns()) {
        Column c = Column::make(src.name, src.type);
        for (size_t r : rows) c.push_from(src, r);
        cols.push_back(std::move(c));
    }
    return Table(std::move(cols), rows.size());
}

Table canonicalize_rows(const Table& t) {
    std::vector<std::pair<std::string, bool>> keys;
    keys.reserve(t.ncols());
    for (const auto& c : t.columns()) keys.emplace_back(c.name, true);
    return take_rows(t, sorted_row_order(t, keys));
}

bool tables_almost_equal(const Table& a, const Table& b, double rel_tol, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (a.nrows() != b.nrows())
        return fail("row count " + std::to_string(a.nrows()) + " vs " + std::to_string(b.nrows()));
    if (a.ncols() != b.ncols()) return fail("column count differs");
    for (size_t i = 0; i < a.ncols(); ++i) {
        const Column& ca = a.column(i);
        const Column& cb = b.column(i);
        if (ca.name != cb.name) return fail("column name '" + ca.name + "' vs '" + cb.name + "'");
        if (ca.type != cb.type)
            return fail("column '" + ca.name + "' type " + data_type_name(ca.type) + " vs " +
                        data_type_name(cb.type));
        for (size_t r = 0; r < a.nrows(); ++r) {
            if (ca.is_null(r) != cb.is_null(r))
                return fail("column '" + ca.name + "' row " + std::to_string(r) +
                            " null mismatch");
            if (ca.is_null(r)) continue;
            bool ok;
            if (ca.type == DataType::Float64) {
                double x = ca.floats()[r], y = cb.floats()[r];
                if (std::isnan(x) && std::isnan(y)) ok = true;
                else if (std::isinf(x) || std::isinf(y)) ok = x == y;
                else ok = std::fabs(x - y) <= rel_tol * std::max({std::fabs(x), std::fabs(y), 1e-300});
            } else {
                ok = ca.get(r) == cb.get(r);
            }
            if (!ok)
                return fail("column '" + ca.name + "' row " + std::to_string(r) + ": " +
                            value_to_string(ca.get(r)) + " vs " + value_to_string(cb.get(r)));
        }
    }
    return true;
}

} // namespace specfission
