#include "support/reference_impls.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "specfission/error.hpp"
#include "specfission/time_util.hpp"

namespace specfission::testref {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

bool num(const Value& v) { return v.is_number() || v.is_timestamp(); }

double as_d(const Value& v) {
    if (v.is_int()) return double(v.as_int());
    if (v.is_float()) return v.as_float();
    if (v.is_timestamp()) return double(v.as_timestamp().ms);
    fail(ErrorCode::TypeError, "reference: not a number");
}

// Total order used for sorting and min/max: nulls first, NaN last among
// numbers, mixed kinds by a fixed rank.
int ref_cmp(const Value& a, const Value& b) {
    auto rank = [](const Value& v) {
        if (v.is_null()) return 0;
        if (v.is_bool()) return 1;
        if (num(v)) return 2;
        if (v.is_string()) return 3;
        if (v.is_timestamp()) return 4;
        return 5;
    };
    // timestamps mix with numbers for ordering purposes
    auto r = [&](const Value& v) { return v.is_timestamp() ? 2 : rank(v); };
    if (r(a) != r(b)) return r(a) < r(b) ? -1 : 1;
    if (a.is_null()) return 0;
    if (a.is_bool()) return int(a.as_bool()) - int(b.as_bool());
    if (num(a)) {
        double x = as_d(a), y = as_d(b);
        if (std::isnan(x) && std::isnan(y)) return 0;
        if (std::isnan(x)) return 1;
        if (std::isnan(y)) return -1;
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (a.is_string()) {
        int c = a.as_string().compare(b.as_string());
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    const auto& la = a.as_list();
    const auto& lb = b.as_list();
    for (size_t i = 0; i < la.size() && i < lb.size(); ++i) {
        int c = ref_cmp(la[i], lb[i]);
        if (c) return c;
    }
    return la.size() == lb.size() ? 0 : (la.size() < lb.size() ? -1 : 1);
}

} // namespace

std::vector<Row> table_rows(const Table& t) {
    std::vector<Row> rows(t.nrows());
    for (const auto& c : t.columns())
        for (size_t r = 0; r < t.nrows(); ++r) rows[r][c.name] = c.get(r);
    return rows;
}

// ---------------------------------------------------------------------------
// Reference evaluator

namespace {

Value ref_eval(const ExprPtr& e, const Row& datum, const std::map<std::string, Value>& signals);

Value ref_call(const ExprNode& n, const Row& datum,
               const std::map<std::string, Value>& signals) {
    const std::string& f = n.name;
    if (f == "if") {
        Value c = ref_eval(n.args.at(0), datum, signals);
        if (!c.is_bool()) fail(ErrorCode::TypeError, "if() condition must be boolean");
        return ref_eval(n.args.at(c.as_bool() ? 1 : 2), datum, signals);
    }
    std::vector<Value> a;
    for (const auto& arg : n.args) a.push_back(ref_eval(arg, datum, signals));

    if (f == "abs") {
        if (a.at(0).is_null()) return Value();
        if (a[0].is_int()) return Value(int64_t(std::llabs(a[0].as_int())));
        if (a[0].is_float()) return Value(std::fabs(a[0].as_float()));
        fail(ErrorCode::TypeError, "abs");
    }
    if (f == "ceil" || f == "floor" || f == "round" || f == "sqrt" || f == "exp" || f == "log") {
        if (a.at(0).is_null()) return Value();
        if (!a[0].is_number()) fail(ErrorCode::TypeError, f);
        double x = as_d(a[0]);
        if (f == "ceil") return Value(std::ceil(x));
        if (f == "floor") return Value(std::floor(x));
        if (f == "round") return Value(std::round(x));
        if (f == "sqrt") return Value(std::sqrt(x));
        if (f == "exp") return Value(std::exp(x));
        return Value(std::log(x));
    }
    if (f == "pow") {
        if (a.at(0).is_null() || a.at(1).is_null()) return Value();
        if (!a[0].is_number() || !a[1].is_number()) fail(ErrorCode::TypeError, "pow");
        return Value(std::pow(as_d(a[0]), as_d(a[1])));
    }
    if (f == "min" || f == "max") {
        if (a.empty()) fail(ErrorCode::TypeError, f);
        bool ints = true;
        for (const auto& v : a) {
            if (v.is_null()) return Value();
            if (!v.is_number()) fail(ErrorCode::TypeError, f);
            ints = ints && v.is_int();
        }
        if (ints) {
            int64_t best = a[0].as_int();
            for (const auto& v : a)
                best = f == "min" ? std::min(best, v.as_int()) : std::max(best, v.as_int());
            return Value(best);
        }
        double best = as_d(a[0]);
        for (const auto& v : a) {
            if (std::isnan(as_d(v))) return Value(std::nan(""));
            best = f == "min" ? std::min(best, as_d(v)) : std::max(best, as_d(v));
        }
        return Value(best);
    }
    if (f == "length") {
        if (a.at(0).is_null()) return Value();
        if (a[0].is_list()) return Value(int64_t(a[0].as_list().size()));
        if (a[0].is_string()) return Value(int64_t(a[0].as_string().size()));
        fail(ErrorCode::TypeError, "length");
    }
    if (f == "isValid")
        return Value(!(a.at(0).is_null() ||
                       (a[0].is_float() && std::isnan(a[0].as_float()))));
    if (f == "isFinite") return Value(a.at(0).is_number() && std::isfinite(as_d(a[0])));
    if (f == "inrange") {
        const Value& v = a.at(0);
        const Value& r = a.at(1);
        if (v.is_null()) return Value(false);
        if (!num(v)) fail(ErrorCode::TypeError, "inrange value");
        if (!r.is_list() || r.as_list().size() < 2) fail(ErrorCode::TypeError, "inrange range");
        const Value& lo = r.as_list()[0];
        const Value& hi = r.as_list()[1];
        if (lo.is_null() || hi.is_null()) return Value(false);
        if (!num(lo) || !num(hi)) fail(ErrorCode::TypeError, "inrange bounds");
        return Value(as_d(lo) <= as_d(v) && as_d(v) <= as_d(hi));
    }
    if (f == "year" || f == "month" || f == "date" || f == "hours" || f == "minutes") {
        if (a.at(0).is_null()) return Value();
        if (!a[0].is_timestamp()) fail(ErrorCode::TypeError, f);
        CivilTime c = civil_from_ms(a[0].as_timestamp().ms);
        if (f == "year") return Value(int64_t(c.year));
        if (f == "month") return Value(int64_t(c.month - 1));
        if (f == "date") return Value(int64_t(c.day));
        if (f == "hours") return Value(int64_t(c.hour));
        return Value(int64_t(c.minute));
    }
    if (f == "time") {
        if (a.at(0).is_null()) return Value();
        if (!a[0].is_timestamp()) fail(ErrorCode::TypeError, "time");
        return Value(a[0].as_timestamp().ms);
    }
    if (f == "toNumber") {
        const Value& v = a.at(0);
        if (v.is_null()) return Value();
        if (v.is_number()) return v;
        if (v.is_bool()) return Value(int64_t(v.as_bool()));
        if (v.is_timestamp()) return Value(v.as_timestamp().ms);
        if (v.is_string()) {
            const std::string& s = v.as_string();
            char* end = nullptr;
            errno = 0;
            long long i = std::strtoll(s.c_str(), &end, 10);
            if (errno == 0 && end == s.c_str() + s.size() && !s.empty())
                return Value(int64_t(i));
            end = nullptr;
            double d = std::strtod(s.c_str(), &end);
            if (end == s.c_str() + s.size() && !s.empty()) return Value(d);
            return Value(std::nan(""));
        }
        fail(ErrorCode::TypeError, "toNumber");
    }
    if (f == "toString") {
        const Value& v = a.at(0);
        if (v.is_null()) return Value();
        if (v.is_string()) return v;
        if (v.is_timestamp()) return Value(format_iso8601(v.as_timestamp().ms));
        if (v.is_list()) fail(ErrorCode::TypeError, "toString list");
        return Value(value_to_string(v));
    }
    fail(ErrorCode::TypeError, "reference: unknown function " + f);
}

Value ref_eval(const ExprPtr& e, const Row& datum, const std::map<std::string, Value>& signals) {
    const ExprNode& n = *e;
    switch (n.kind) {
    case ExprKind::Literal: return n.literal;
    case ExprKind::Identifier: {
        if (n.name == "datum") fail(ErrorCode::TypeError, "bare datum");
        if (n.name == "NaN") return Value(std::nan(""));
        if (n.name == "PI") return Value(3.141592653589793);
        if (n.name == "E") return Value(2.718281828459045);
        if (n.name == "LN2") return Value(0.6931471805599453);
        if (n.name == "LN10") return Value(2.302585092994046);
        if (n.name == "LOG2E") return Value(1.4426950408889634);
        if (n.name == "LOG10E") return Value(0.4342944819032518);
        if (n.name == "SQRT1_2") return Value(0.7071067811865476);
        if (n.name == "SQRT2") return Value(1.4142135623730951);
        if (n.name == "MAX_VALUE") return Value(1.7976931348623157e308);
        if (n.name == "MIN_VALUE") return Value(5e-324);
        auto it = signals.find(n.name);
        if (it == signals.end()) fail(ErrorCode::UnboundSignal, "reference: " + n.name);
        return it->second;
    }
    case ExprKind::Member: {
        if (n.object->kind == ExprKind::Identifier && n.object->name == "datum") {
            auto it = datum.find(n.name);
            return it == datum.end() ? Value() : it->second;
        }
        Value obj = ref_eval(n.object, datum, signals);
        if (obj.is_null()) return Value();
        fail(ErrorCode::TypeError, "member of non-object");
    }
    case ExprKind::Index: {
        if (n.object->kind == ExprKind::Identifier && n.object->name == "datum" &&
            n.index->kind == ExprKind::Literal && n.index->literal.is_string()) {
            auto it = datum.find(n.index->literal.as_string());
            return it == datum.end() ? Value() : it->second;
        }
        Value obj = ref_eval(n.object, datum, signals);
        Value idx = ref_eval(n.index, datum, signals);
        if (obj.is_null() || idx.is_null()) return Value();
        if (!obj.is_list()) fail(ErrorCode::TypeError, "index of non-list");
        int64_t i;
        if (idx.is_int()) i = idx.as_int();
        else if (idx.is_float() && idx.as_float() == std::floor(idx.as_float()))
            i = int64_t(idx.as_float());
        else fail(ErrorCode::TypeError, "non-integer index");
        if (i < 0 || size_t(i) >= obj.as_list().size()) return Value();
        return obj.as_list()[size_t(i)];
    }
    case ExprKind::Unary: {
        Value v = ref_eval(n.object, datum, signals);
        if (n.name == "!") {
            if (!v.is_bool()) fail(ErrorCode::TypeError, "! wants bool");
            return Value(!v.as_bool());
        }
        if (v.is_null()) return Value();
        if (v.is_int()) return Value(-v.as_int());
        if (v.is_float()) return Value(-v.as_float());
        fail(ErrorCode::TypeError, "unary -");
    }
    case ExprKind::Binary: {
        const std::string& op = n.name;
        if (op == "&&" || op == "||") {
            Value l = ref_eval(n.object, datum, signals);
            if (!l.is_bool()) fail(ErrorCode::TypeError, op + " wants bool");
            if (op == "&&" && !l.as_bool()) return Value(false);
            if (op == "||" && l.as_bool()) return Value(true);
            Value r = ref_eval(n.index, datum, signals);
            if (!r.is_bool()) fail(ErrorCode::TypeError, op + " wants bool");
            return r;
        }
        Value l = ref_eval(n.object, datum, signals);
        Value r = ref_eval(n.index, datum, signals);
        if (op == "==" || op == "===" || op == "!=" || op == "!==") {
            bool eq;
            if (l.is_null() || r.is_null()) {
                eq = l.is_null() && r.is_null();
            } else if (num(l) && num(r)) {
                if (l.is_int() && r.is_int()) eq = l.as_int() == r.as_int();
                else eq = as_d(l) == as_d(r);
            } else if (l.storage().index() != r.storage().index()) {
                eq = false;
            } else {
                eq = l == r;
            }
            return Value(op == "==" || op == "===" ? eq : !eq);
        }
        if (op == "<" || op == "<=" || op == ">" || op == ">=") {
            if (l.is_null() || r.is_null()) return Value(false);
            int c;
            if (num(l) && num(r)) {
                double x = as_d(l), y = as_d(r);
                if (std::isnan(x) || std::isnan(y)) return Value(false);
                c = x < y ? -1 : (x > y ? 1 : 0);
            } else if (l.is_string() && r.is_string()) {
                int k = l.as_string().compare(r.as_string());
                c = k < 0 ? -1 : (k > 0 ? 1 : 0);
            } else {
                fail(ErrorCode::TypeError, "order on bad types");
            }
            if (op == "<") return Value(c < 0);
            if (op == "<=") return Value(c <= 0);
            if (op == ">") return Value(c > 0);
            return Value(c >= 0);
        }
        // arithmetic
        if (l.is_null() || r.is_null()) return Value();
        if (op == "+" && l.is_string() && r.is_string())
            return Value(l.as_string() + r.as_string());
        if (!l.is_number() || !r.is_number()) fail(ErrorCode::TypeError, "arith on non-number");
        if (op == "/") return Value(as_d(l) / as_d(r));
        if (l.is_int() && r.is_int()) {
            int64_t x = l.as_int(), y = r.as_int();
            if (op == "+") return Value(x + y);
            if (op == "-") return Value(x - y);
            if (op == "*") return Value(x * y);
            if (y == 0) return Value(std::nan(""));
            return Value(x % y);
        }
        double x = as_d(l), y = as_d(r);
        if (op == "+") return Value(x + y);
        if (op == "-") return Value(x - y);
        if (op == "*") return Value(x * y);
        return Value(std::fmod(x, y));
    }
    case ExprKind::Ternary: {
        Value c = ref_eval(n.object, datum, signals);
        if (!c.is_bool()) fail(ErrorCode::TypeError, "?: wants bool");
        return ref_eval(c.as_bool() ? n.index : n.third, datum, signals);
    }
    case ExprKind::Call: return ref_call(n, datum, signals);
    case ExprKind::ArrayLit: {
        ValueList out;
        for (const auto& a : n.args) out.push_back(ref_eval(a, datum, signals));
        return Value(std::move(out));
    }
    }
    fail(ErrorCode::TypeError, "reference: bad node");
}

} // namespace

Value ref_evaluate(const ExprPtr& ast, const Row& datum,
                   const std::map<std::string, Value>& signals) {
    return ref_eval(ast, datum, signals);
}

// ---------------------------------------------------------------------------
// Reference transforms

std::vector<Row> ref_filter(const std::vector<Row>& rows, const ExprPtr& pred,
                            const std::map<std::string, Value>& signals) {
    std::vector<Row> out;
    for (const auto& row : rows) {
        Value v = ref_eval(pred, row, signals);
        if (!v.is_bool()) fail(ErrorCode::TypeError, "filter predicate must be boolean");
        if (v.as_bool()) out.push_back(row);
    }
    return out;
}

std::vector<Row> ref_formula(const std::vector<Row>& rows, const ExprPtr& expr,
                             const std::string& as,
                             const std::map<std::string, Value>& signals) {
    std::vector<Row> out = rows;
    for (auto& row : out) row[as] = ref_eval(expr, row, signals);
    return out;
}

std::vector<Row> ref_bin(const std::vector<Row>& rows, const std::string& field,
                         const BinParams& p, const std::string& as0, const std::string& as1) {
    std::vector<Row> out = rows;
    double nbins = std::max(1.0, std::round((p.stop - p.start) / p.step));
    for (auto& row : out) {
        Value v = row.count(field) ? row[field] : Value();
        if (v.is_null() || !v.is_number() || std::isnan(as_d(v)) || as_d(v) < p.start ||
            as_d(v) > p.stop) {
            row[as0] = Value();
            row[as1] = Value();
            continue;
        }
        double idx = std::floor((as_d(v) - p.start) / p.step);
        if (idx >= nbins) idx = nbins - 1;
        row[as0] = Value(p.start + idx * p.step);
        row[as1] = Value(p.start + idx * p.step + p.step);
    }
    return out;
}

std::vector<Row> ref_timeunit(const std::vector<Row>& rows, const std::string& field,
                              const std::string& units, const std::string& as0,
                              const std::string& as1) {
    std::vector<Row> out = rows;
    for (auto& row : out) {
        Value v = row.count(field) ? row[field] : Value();
        if (v.is_null()) {
            row[as0] = Value();
            row[as1] = Value();
            continue;
        }
        CivilTime c = civil_from_ms(v.as_timestamp().ms);
        CivilTime f{};
        CivilTime n{};
        if (units == "year") {
            f = {c.year, 1, 1, 0, 0, 0, 0};
            n = {c.year + 1, 1, 1, 0, 0, 0, 0};
        } else if (units == "month" || units == "yearmonth") {
            f = {c.year, c.month, 1, 0, 0, 0, 0};
            n = c.month == 12 ? CivilTime{c.year + 1, 1, 1, 0, 0, 0, 0}
                              : CivilTime{c.year, c.month + 1, 1, 0, 0, 0, 0};
        } else if (units == "date" || units == "yearmonthdate") {
            f = {c.year, c.month, c.day, 0, 0, 0, 0};
            row[as0] = Value(Timestamp{ms_from_civil(f)});
            row[as1] = Value(Timestamp{ms_from_civil(f) + 86400000});
            continue;
        } else if (units == "hours") {
            f = {c.year, c.month, c.day, c.hour, 0, 0, 0};
            row[as0] = Value(Timestamp{ms_from_civil(f)});
            row[as1] = Value(Timestamp{ms_from_civil(f) + 3600000});
            continue;
        } else if (units == "minutes") {
            f = {c.year, c.month, c.day, c.hour, c.minute, 0, 0};
            row[as0] = Value(Timestamp{ms_from_civil(f)});
            row[as1] = Value(Timestamp{ms_from_civil(f) + 60000});
            continue;
        } else if (units == "day") {
            int w = weekday_from_days(days_from_civil(c.year, c.month, c.day));
            int64_t anchor = (days_from_civil(2012, 1, 1) + w) * 86400000;
            row[as0] = Value(Timestamp{anchor});
            row[as1] = Value(Timestamp{anchor + 86400000});
            continue;
        } else {
            fail(ErrorCode::TypeError, "reference: bad units");
        }
        row[as0] = Value(Timestamp{ms_from_civil(f)});
        row[as1] = Value(Timestamp{ms_from_civil(n)});
    }
    return out;
}

namespace {

Value ref_agg_value(const std::vector<Row>& members, const AggregateOp& op) {
    if (op.op == "count") return Value(int64_t(members.size()));
    auto field_of = [&](const Row& row) {
        auto it = row.find(*op.field);
        return it == row.end() ? Value() : it->second;
    };
    if (op.op == "valid") {
        int64_t n = 0;
        for (const auto& row : members)
            if (!field_of(row).is_null()) ++n;
        return Value(n);
    }
    if (op.op == "min" || op.op == "max") {
        std::optional<Value> best;
        for (const auto& row : members) {
            Value v = field_of(row);
            if (v.is_null()) continue;
            if (v.is_float() && std::isnan(v.as_float())) continue;
            if (!best || (op.op == "min" ? ref_cmp(v, *best) < 0 : ref_cmp(v, *best) > 0))
                best = v;
        }
        return best ? *best : Value();
    }
    std::vector<double> vals;
    bool ints = true;
    for (const auto& row : members) {
        Value v = field_of(row);
        if (v.is_null()) continue;
        ints = ints && v.is_int();
        vals.push_back(as_d(v));
    }
    if (vals.empty()) return Value();
    double sum = 0;
    for (double v : vals) sum += v;
    if (op.op == "sum") return ints ? Value(int64_t(sum)) : Value(sum);
    if (op.op == "mean") return Value(sum / double(vals.size()));
    if (op.op == "variance" || op.op == "stdev") {
        if (vals.size() < 2) return Value();
        double m = sum / double(vals.size());
        double ss = 0;
        for (double v : vals) ss += (v - m) * (v - m);
        double var = ss / double(vals.size() - 1);
        return Value(op.op == "variance" ? var : std::sqrt(var));
    }
    if (op.op == "median") {
        std::sort(vals.begin(), vals.end());
        size_t n = vals.size();
        return Value(n % 2 ? vals[n / 2] : (vals[n / 2 - 1] + vals[n / 2]) / 2.0);
    }
    fail(ErrorCode::NonNumericAggregate, "reference: bad op " + op.op);
}

std::vector<std::pair<std::vector<Value>, std::vector<Row>>>
ref_groups(const std::vector<Row>& rows, const std::vector<std::string>& groupby) {
    std::vector<std::pair<std::vector<Value>, std::vector<Row>>> groups;
    for (const auto& row : rows) {
        std::vector<Value> key;
        for (const auto& g : groupby) {
            auto it = row.find(g);
            key.push_back(it == row.end() ? Value() : it->second);
        }
        bool found = false;
        for (auto& [k, members] : groups) {
            bool same = true;
            for (size_t i = 0; i < key.size() && same; ++i)
                if (ref_cmp(k[i], key[i]) != 0) same = false;
            if (same) {
                members.push_back(row);
                found = true;
                break;
            }
        }
        if (!found) groups.push_back({key, {row}});
    }
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
        for (size_t i = 0; i < a.first.size(); ++i) {
            int c = ref_cmp(a.first[i], b.first[i]);
            if (c) return c < 0;
        }
        return false;
    });
    return groups;
}

} // namespace

std::vector<Row> ref_aggregate(const std::vector<Row>& rows,
                               const std::vector<std::string>& groupby,
                               const std::vector<AggregateOp>& ops) {
    std::vector<Row> out;
    if (groupby.empty()) {
        Row row;
        for (const auto& op : ops)
            row[op.as] = rows.empty() && op.op != "count" && op.op != "valid"
                             ? Value()
                             : ref_agg_value(rows, op);
        out.push_back(std::move(row));
        return out;
    }
    for (const auto& [key, members] : ref_groups(rows, groupby)) {
        Row row;
        for (size_t i = 0; i < groupby.size(); ++i) row[groupby[i]] = key[i];
        for (const auto& op : ops) row[op.as] = ref_agg_value(members, op);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<Row> ref_joinaggregate(const std::vector<Row>& rows,
                                   const std::vector<std::string>& groupby,
                                   const std::vector<AggregateOp>& ops) {
    std::vector<Row> out = rows;
    if (groupby.empty()) {
        for (auto& row : out)
            for (const auto& op : ops)
                row[op.as] = rows.empty() ? Value() : ref_agg_value(rows, op);
        return out;
    }
    auto groups = ref_groups(rows, groupby);
    for (auto& row : out) {
        std::vector<Value> key;
        for (const auto& g : groupby) {
            auto it = row.find(g);
            key.push_back(it == row.end() ? Value() : it->second);
        }
        for (const auto& [k, members] : groups) {
            bool same = true;
            for (size_t i = 0; i < key.size() && same; ++i)
                if (ref_cmp(k[i], key[i]) != 0) same = false;
            if (same) {
                for (const auto& op : ops) row[op.as] = ref_agg_value(members, op);
                break;
            }
        }
    }
    return out;
}

std::vector<Row> ref_window(const std::vector<Row>& rows,
                            const std::vector<std::string>& partition_by,
                            const std::vector<SortKey>& sort,
                            const std::vector<WindowOp>& ops) {
    std::vector<Row> out = rows;
    std::vector<size_t> all(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) all[i] = i;

    auto key_of = [&](size_t r) {
        std::vector<Value> key;
        for (const auto& g : partition_by) {
            auto it = rows[r].find(g);
            key.push_back(it == rows[r].end() ? Value() : it->second);
        }
        return key;
    };
    auto sort_vals = [&](size_t r) {
        std::vector<Value> v;
        for (const auto& k : sort) {
            auto it = rows[r].find(k.field);
            v.push_back(it == rows[r].end() ? Value() : it->second);
        }
        return v;
    };

    // partitions keyed by first occurrence
    std::vector<std::pair<std::vector<Value>, std::vector<size_t>>> parts;
    for (size_t r : all) {
        auto key = key_of(r);
        bool found = false;
        for (auto& [k, members] : parts) {
            bool same = true;
            for (size_t i = 0; i < key.size() && same; ++i)
                if (ref_cmp(k[i], key[i]) != 0) same = false;
            if (same) {
                members.push_back(r);
                found = true;
                break;
            }
        }
        if (!found) parts.push_back({key, {r}});
    }

    for (auto& [key, members] : parts) {
        std::vector<size_t> order = members;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            auto va = sort_vals(a), vb = sort_vals(b);
            for (size_t i = 0; i < va.size(); ++i) {
                int c = ref_cmp(va[i], vb[i]);
                if (c) return sort[i].ascending ? c < 0 : c > 0;
            }
            return false;
        });
        auto peers = [&](size_t a, size_t b) {
            auto va = sort_vals(a), vb = sort_vals(b);
            for (size_t i = 0; i < va.size(); ++i)
                if (ref_cmp(va[i], vb[i]) != 0) return false;
            return true;
        };
        for (const auto& op : ops) {
            if (op.op == "row_number") {
                for (size_t i = 0; i < order.size(); ++i)
                    out[order[i]][op.as] = Value(int64_t(i + 1));
            } else if (op.op == "rank" || op.op == "dense_rank") {
                int64_t rank = 0, dense = 0;
                for (size_t i = 0; i < order.size(); ++i) {
                    if (i == 0 || !peers(order[i], order[i - 1])) {
                        rank = int64_t(i + 1);
                        ++dense;
                    }
                    out[order[i]][op.as] = Value(op.op == "rank" ? rank : dense);
                }
            } else {
                for (size_t i = 0; i < order.size(); ++i) {
                    std::vector<Row> frame;
                    for (size_t j = 0; j <= i; ++j) frame.push_back(rows[order[j]]);
                    AggregateOp agg{op.op, op.field, op.as};
                    out[order[i]][op.as] = ref_agg_value(frame, agg);
                }
            }
        }
    }
    return out;
}

std::vector<Row> ref_collect(const std::vector<Row>& rows, const std::vector<SortKey>& sort) {
    std::vector<size_t> order(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        for (const auto& k : sort) {
            auto ia = rows[a].find(k.field);
            auto ib = rows[b].find(k.field);
            int c = ref_cmp(ia == rows[a].end() ? Value() : ia->second,
                            ib == rows[b].end() ? Value() : ib->second);
            if (c) return k.ascending ? c < 0 : c > 0;
        }
        return false;
    });
    std::vector<Row> out;
    for (size_t r : order) out.push_back(rows[r]);
    return out;
}

Value ref_extent(const std::vector<Row>& rows, const std::string& field) {
    std::optional<Value> lo, hi;
    for (const auto& row : rows) {
        auto it = row.find(field);
        if (it == row.end() || it->second.is_null()) continue;
        const Value& v = it->second;
        if (v.is_float() && std::isnan(v.as_float())) continue;
        if (!lo || ref_cmp(v, *lo) < 0) lo = v;
        if (!hi || ref_cmp(v, *hi) > 0) hi = v;
    }
    return Value(ValueList{lo ? *lo : Value(), hi ? *hi : Value()});
}

BinParams ref_nice_bin_params(double lo, double hi, int maxbins) {
    double best = 0;
    bool found = false;
    for (int z = -20; z <= 20; ++z) {
        for (double m : {1.0, 2.0, 5.0}) {
            double step = m * std::pow(10.0, z);
            if (std::ceil((hi - lo) / step - 1e-9) <= maxbins) {
                if (!found || step < best) {
                    best = step;
                    found = true;
                }
            }
        }
    }
    if (!found) fail(ErrorCode::DegenerateExtent, "reference: no step");
    BinParams p;
    p.step = best;
    p.start = std::floor(lo / best + 1e-9) * best;
    p.stop = std::ceil(hi / best - 1e-9) * best;
    return p;
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

bool value_close(const Value& a, const Value& b) {
    if (a.is_null() || b.is_null()) return a.is_null() && b.is_null();
    if (a.is_float() || b.is_float()) {
        if (!a.is_number() || !b.is_number()) return false;
        double x = as_d(a), y = as_d(b);
        if (std::isnan(x) && std::isnan(y)) return true;
        if (std::isinf(x) || std::isinf(y)) return x == y;
        return std::fabs(x - y) <= 1e-9 * std::max({std::fabs(x), std::fabs(y), 1.0});
    }
    return a == b;
}

} // namespace

bool rows_match(const Table& actual, const std::vector<Row>& expected, std::string* why) {
    auto fail_msg = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (actual.nrows() != expected.size())
        return fail_msg("row count " + std::to_string(actual.nrows()) + " vs reference " +
                        std::to_string(expected.size()));

    std::set<std::string> expected_cols;
    for (const auto& row : expected)
        for (const auto& [k, v] : row) expected_cols.insert(k);
    // Engine columns must cover the reference's; schema-only (all-null
    // columns dropped from rows) mismatches are caught by value checks.
    for (const auto& name : expected_cols)
        if (!actual.find_column(name)) return fail_msg("missing column '" + name + "'");

    auto boxed = table_rows(actual);
    auto canon = [&](std::vector<Row>& rows) {
        std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
            for (const auto& col : actual.columns()) {
                auto ia = a.find(col.name);
                auto ib = b.find(col.name);
                int c = ref_cmp(ia == a.end() ? Value() : ia->second,
                                ib == b.end() ? Value() : ib->second);
                if (c) return c < 0;
            }
            return false;
        });
    };
    std::vector<Row> want = expected;
    canon(boxed);
    canon(want);
    for (size_t r = 0; r < boxed.size(); ++r) {
        for (const auto& col : actual.columns()) {
            auto ia = boxed[r].find(col.name);
            auto ib = want[r].find(col.name);
            Value va = ia == boxed[r].end() ? Value() : ia->second;
            Value vb = ib == want[r].end() ? Value() : ib->second;
            if (!value_close(va, vb))
                return fail_msg("row " + std::to_string(r) + " column '" + col.name + "': " +
                                value_to_string(va) + " vs reference " + value_to_string(vb));
        }
    }
    return true;
}

} // namespace specfission::testref
