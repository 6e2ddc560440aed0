#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace specfission {

/// Millisecond-resolution UTC instant. Kept as a distinct tag so tables and
/// expressions can tell timestamps apart from plain integers.
struct Timestamp {
    int64_t ms = 0;
    friend bool operator==(Timestamp a, Timestamp b) { return a.ms == b.ms; }
    friend auto operator<=>(Timestamp a, Timestamp b) { return a.ms <=> b.ms; }
};

class Value;
using ValueList = std::vector<Value>;

/// Tagged scalar: the unit of signal values, expression results and table
/// cells. Int and float are distinct tags; comparisons between them coerce
/// to float.
class Value {
  public:
    using Storage =
        std::variant<std::monostate, bool, int64_t, double, std::string, Timestamp, ValueList>;

    Value() = default;
    Value(std::nullptr_t) {}
    Value(bool b) : v_(b) {}
    Value(int i) : v_(static_cast<int64_t>(i)) {}
    Value(int64_t i) : v_(i) {}
    Value(double d) : v_(d) {}
    Value(const char* s) : v_(std::string(s)) {}
    Value(std::string s) : v_(std::move(s)) {}
    Value(Timestamp t) : v_(t) {}
    Value(ValueList l) : v_(std::move(l)) {}

    bool is_null() const { return std::holds_alternative<std::monostate>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_int() const { return std::holds_alternative<int64_t>(v_); }
    bool is_float() const { return std::holds_alternative<double>(v_); }
    bool is_number() const { return is_int() || is_float(); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_timestamp() const { return std::holds_alternative<Timestamp>(v_); }
    bool is_list() const { return std::holds_alternative<ValueList>(v_); }

    bool as_bool() const { return std::get<bool>(v_); }
    int64_t as_int() const { return std::get<int64_t>(v_); }
    double as_float() const { return std::get<double>(v_); }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    Timestamp as_timestamp() const { return std::get<Timestamp>(v_); }
    const ValueList& as_list() const { return std::get<ValueList>(v_); }

    /// Numeric view: int, float and timestamp all read as double.
    double number_as_double() const;

    const Storage& storage() const { return v_; }

    /// Strict equality: same tag required except int/float which compare
    /// numerically. NaN is unequal to itself.
    friend bool operator==(const Value& a, const Value& b);
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

    std::string type_name() const;

  private:
    Storage v_;
};

/// Total order used for canonical sorting (group keys, collect, row
/// canonicalization): null first, then false<true, then numbers (NaN last),
/// strings code-point order, timestamps, lists lexicographic. Distinct
/// non-coercible tags order by tag index.
int canonical_compare(const Value& a, const Value& b);

/// Lossless JSON mapping for everything JSON can express. Timestamps encode
/// as integer epoch-ms and therefore read back as ints; callers that care
/// keep the type tag elsewhere (tables carry a schema). JSON objects are not
/// representable and yield nullopt via from_json_checked.
nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);
bool json_representable_as_value(const nlohmann::json& j);

/// Canonical length-prefixed byte encoding used inside fingerprints.
/// Layout per value: one tag byte, then payload:
///   'n' null | 'b' u8 | 'i' i64 LE | 'f' f64 bits LE | 's' u32 len + bytes |
///   't' i64 LE | 'l' u32 count + elements
void encode_value(const Value& v, std::string& out);

std::string value_to_string(const Value& v);

} // namespace specfission
