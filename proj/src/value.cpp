#include "specfission/value.hpp"

#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"

namespace specfission {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::UnboundSignal: return "UnboundSignal";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::BadUtf8: return "BadUtf8";
    case ErrorCode::NotAnArray: return "NotAnArray";
    case ErrorCode::NestedValue: return "NestedValue";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::NonNumericField: return "NonNumericField";
    case ErrorCode::NonTimestampField: return "NonTimestampField";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::NonNumericAggregate: return "NonNumericAggregate";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::FetchError: return "FetchError";
    case ErrorCode::IngestError: return "IngestError";
    case ErrorCode::LoadError: return "LoadError";
    case ErrorCode::TransformError: return "TransformError";
    case ErrorCode::MalformedRequest: return "MalformedRequest";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::UnknownSignal: return "UnknownSignal";
    case ErrorCode::UnexpectedResponse: return "UnexpectedResponse";
    case ErrorCode::UnsupportedForOracle: return "UnsupportedForOracle";
    }
    return "Unknown";
}

double Value::number_as_double() const {
    if (is_int()) return static_cast<double>(as_int());
    if (is_float()) return as_float();
    if (is_timestamp()) return static_cast<double>(as_timestamp().ms);
    throw Error(ErrorCode::TypeError, "not a number: " + type_name());
}

std::string Value::type_name() const {
    switch (v_.index()) {
    case 0: return "null";
    case 1: return "boolean";
    case 2: return "integer";
    case 3: return "float";
    case 4: return "string";
    case 5: return "timestamp";
    case 6: return "list";
    }
    return "?";
}

bool operator==(const Value& a, const Value& b) {
    if (a.is_number() && b.is_number()) {
        if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
        return a.number_as_double() == b.number_as_double();
    }
    if (a.v_.index() != b.v_.index()) return false;
    return a.v_ == b.v_;
}

namespace {

int tag_rank(const Value& v) {
    if (v.is_null()) return 0;
    if (v.is_bool()) return 1;
    if (v.is_number()) return 2;
    if (v.is_string()) return 3;
    if (v.is_timestamp()) return 4;
    return 5;
}

} // namespace

int canonical_compare(const Value& a, const Value& b) {
    int ra = tag_rank(a), rb = tag_rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (ra) {
    case 0: return 0;
    case 1: return int(a.as_bool()) - int(b.as_bool());
    case 2: {
        double x = a.number_as_double(), y = b.number_as_double();
        bool nx = std::isnan(x), ny = std::isnan(y);
        if (nx || ny) return nx == ny ? 0 : (nx ? 1 : -1); // NaN sorts last
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    case 3: {
        int c = a.as_string().compare(b.as_string());
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case 4: {
        int64_t x = a.as_timestamp().ms, y = b.as_timestamp().ms;
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    default: {
        const auto& la = a.as_list();
        const auto& lb = b.as_list();
        size_t n = std::min(la.size(), lb.size());
        for (size_t i = 0; i < n; ++i) {
            int c = canonical_compare(la[i], lb[i]);
            if (c != 0) return c;
        }
        if (la.size() != lb.size()) return la.size() < lb.size() ? -1 : 1;
        return 0;
    }
    }
}

nlohmann::json value_to_json(const Value& v) {
    if (v.is_null()) return nullptr;
    if (v.is_bool()) return v.as_bool();
    if (v.is_int()) return v.as_int();
    if (v.is_float()) return v.as_float();
    if (v.is_string()) return v.as_string();
    if (v.is_timestamp()) return v.as_timestamp().ms;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : v.as_list()) arr.push_back(value_to_json(e));
    return arr;
}

Value value_from_json(const nlohmann::json& j) {
    using nlohmann::json;
    switch (j.type()) {
    case json::value_t::null: return Value();
    case json::value_t::boolean: return Value(j.get<bool>());
    case json::value_t::number_integer: return Value(j.get<int64_t>());
    case json::value_t::number_unsigned: {
        uint64_t u = j.get<uint64_t>();
        if (u <= uint64_t(INT64_MAX)) return Value(static_cast<int64_t>(u));
        return Value(static_cast<double>(u));
    }
    case json::value_t::number_float: return Value(j.get<double>());
    case json::value_t::string: return Value(j.get<std::string>());
    case json::value_t::array: {
        ValueList l;
        l.reserve(j.size());
        for (const auto& e : j) l.push_back(value_from_json(e));
        return Value(std::move(l));
    }
    default:
        throw Error(ErrorCode::TypeError, "JSON objects cannot be represented as values");
    }
}

bool json_representable_as_value(const nlohmann::json& j) {
    if (j.is_object()) return false;
    if (j.is_array()) {
        for (const auto& e : j)
            if (!json_representable_as_value(e)) return false;
    }
    return true;
}

namespace {

void put_u32(std::string& out, uint32_t n) {
    for (int i = 0; i < 4; ++i) out.push_back(char((n >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, int64_t n) {
    auto u = static_cast<uint64_t>(n);
    for (int i = 0; i < 8; ++i) out.push_back(char((u >> (8 * i)) & 0xff));
}

} // namespace

void encode_value(const Value& v, std::string& out) {
    if (v.is_null()) {
        out.push_back('n');
    } else if (v.is_bool()) {
        out.push_back('b');
        out.push_back(v.as_bool() ? 1 : 0);
    } else if (v.is_int()) {
        out.push_back('i');
        put_i64(out, v.as_int());
    } else if (v.is_float()) {
        out.push_back('f');
        uint64_t bits;
        double d = v.as_float();
        std::memcpy(&bits, &d, 8);
        put_i64(out, static_cast<int64_t>(bits));
    } else if (v.is_string()) {
        out.push_back('s');
        put_u32(out, static_cast<uint32_t>(v.as_string().size()));
        out += v.as_string();
    } else if (v.is_timestamp()) {
        out.push_back('t');
        put_i64(out, v.as_timestamp().ms);
    } else {
        out.push_back('l');
        const auto& l = v.as_list();
        put_u32(out, static_cast<uint32_t>(l.size()));
        for (const auto& e : l) encode_value(e, out);
    }
}

std::string value_to_string(const Value& v) { return value_to_json(v).dump(); }

} // namespace specfission
