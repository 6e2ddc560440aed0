#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "specfission/value.hpp"

namespace specfission {

enum class DataType { Bool, Int64, Float64, String, Timestamp };

const char* data_type_name(DataType t); // wire tags: bool i64 f64 str ts
std::optional<DataType> data_type_from_name(const std::string& name);

/// One named column. Storage is typed: Bool uses the u8 vector, Int64 and
/// Timestamp the i64 vector, Float64 the double vector, String the string
/// vector. validity[i] == 0 marks a null cell (payload is a default value).
struct Column {
    std::string name;
    DataType type = DataType::Float64;
    std::variant<std::vector<uint8_t>, std::vector<int64_t>, std::vector<double>,
                 std::vector<std::string>>
        data;
    std::vector<uint8_t> validity;

    size_t size() const { return validity.size(); }
    bool is_null(size_t row) const { return validity[row] == 0; }
    Value get(size_t row) const;

    const std::vector<uint8_t>& bools() const { return std::get<0>(data); }
    const std::vector<int64_t>& ints() const { return std::get<1>(data); }
    const std::vector<double>& floats() const { return std::get<2>(data); }
    const std::vector<std::string>& strings() const { return std::get<3>(data); }

    /// Numeric read as double; only valid for Int64/Float64/Timestamp cells.
    double as_double(size_t row) const;

    static Column make(std::string name, DataType type, size_t nrows = 0);
    void push_null();
    void push(const Value& v); // must match column type
    void push_from(const Column& src, size_t row);
};

/// Immutable columnar dataset. Columns share nrows; the schema is the
/// ordered (name, type) view of the columns.
class Table {
  public:
    Table() = default;
    Table(std::vector<Column> columns, size_t nrows);

    size_t nrows() const { return nrows_; }
    size_t ncols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(size_t i) const { return columns_[i]; }

    const Column* find_column(const std::string& name) const;
    /// Throws UnknownField.
    const Column& require_column(const std::string& name) const;
    int column_index(const std::string& name) const; // -1 when absent

    Value cell(size_t row, const std::string& column) const;

    bool operator==(const Table& other) const;

  private:
    std::vector<Column> columns_;
    size_t nrows_ = 0;
};

struct CsvOptions {
    bool header = true;
    char delimiter = ',';
};

/// Schema inference scans all rows per column: every non-empty cell must fit
/// the chosen type; int widens to float widens to string; bool and timestamp
/// apply only when all cells qualify. Empty cells are null under any type.
Table ingest_csv(const std::string& bytes, const CsvOptions& options = {});

/// Array of flat objects; the column set is the union of keys in first-seen
/// order. Typed JSON values feed the same inference lattice as CSV text.
Table ingest_json(const std::string& bytes);
Table table_from_json_rows(const nlohmann::json& rows);

/// Wire format:
/// {"schema":[{"name":...,"type":"i64"|"f64"|"str"|"bool"|"ts"},...],
///  "nrows":N,"columns":{name:[cell,...],...}}
/// "ts" cells are integer epoch-ms; non-finite floats are encoded as the
/// strings "NaN", "Infinity", "-Infinity" so round trips stay lossless.
std::string serialize_table(const Table& t);
nlohmann::json table_to_json(const Table& t);
Table deserialize_table(const std::string& bytes);
Table table_from_json(const nlohmann::json& j);

/// Rows as an array of objects (report/debug output, not the wire format).
nlohmann::json table_to_rows_json(const Table& t);

/// Stable sort permutation by the given columns under canonical value order
/// (nulls first, NaN last); empty column list yields identity.
std::vector<size_t> sorted_row_order(const Table& t,
                                     const std::vector<std::pair<std::string, bool>>& keys);

Table take_rows(const Table& t, const std::vector<size_t>& rows);

/// Canonical form for comparisons: rows sorted by all columns left to right.
Table canonicalize_rows(const Table& t);

/// Deep equality with relative float tolerance; NaN counts equal to NaN.
bool tables_almost_equal(const Table& a, const Table& b, double rel_tol,
                         std::string* why = nullptr);

} // namespace specfission
