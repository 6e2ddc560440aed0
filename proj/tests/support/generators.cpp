#include <cmath>
#include "support/generators.hpp"

namespace specfission::testgen {

Value random_scalar(Rng& rng) {
    switch (rng.int_in(0, 4)) {
    case 0: return Value(rng.int_in(-50, 50));
    case 1: return Value(rng.real_in(-100, 100));
    case 2: return Value(rng.chance(0.5));
    case 3: return Value("s" + std::to_string(rng.int_in(0, 9)));
    default: return Value(Timestamp{rng.int_in(0, 2000000000000LL)});
    }
}

Table random_table(Rng& rng, size_t max_rows) {
    size_t ncols = size_t(rng.int_in(2, 5));
    size_t nrows = size_t(rng.int_in(0, int64_t(max_rows)));
    static const std::vector<std::string> names = {"a", "b", "c", "g", "h"};
    std::vector<Column> cols;
    for (size_t c = 0; c < ncols; ++c) {
        DataType type;
        switch (rng.int_in(0, 5)) {
        case 0: type = DataType::Bool; break;
        case 1:
        case 2: type = DataType::Int64; break;
        case 3:
        case 4: type = DataType::Float64; break;
        default: type = rng.chance(0.5) ? DataType::String : DataType::Timestamp; break;
        }
        Column col = Column::make(names[c], type);
        for (size_t r = 0; r < nrows; ++r) {
            if (rng.chance(0.12)) {
                col.push_null();
                continue;
            }
            switch (type) {
            case DataType::Bool: col.push(Value(rng.chance(0.5))); break;
            case DataType::Int64: col.push(Value(rng.int_in(-8, 8))); break;
            case DataType::Float64:
                // occasional NaN to exercise the float policies
                col.push(rng.chance(0.05) ? Value(std::nan(""))
                                          : Value(rng.real_in(-100, 100)));
                break;
            case DataType::String:
                col.push(Value("s" + std::to_string(rng.int_in(0, 5))));
                break;
            case DataType::Timestamp:
                col.push(Value(Timestamp{rng.int_in(1280000000000LL, 1400000000000LL)}));
                break;
            }
        }
        cols.push_back(std::move(col));
    }
    return Table(std::move(cols), nrows);
}

namespace {

std::shared_ptr<ExprNode> node(ExprKind kind) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    return n;
}

ExprPtr literal(Value v) {
    auto n = node(ExprKind::Literal);
    n->literal = std::move(v);
    return n;
}

ExprPtr datum_field(const std::string& field) {
    auto d = node(ExprKind::Identifier);
    d->name = "datum";
    auto m = node(ExprKind::Member);
    m->object = d;
    m->name = field;
    return m;
}

ExprPtr signal_ref(const std::string& name) {
    auto n = node(ExprKind::Identifier);
    n->name = name;
    return n;
}

} // namespace

ExprPtr random_supported_expr(Rng& rng, const std::vector<std::string>& fields,
                              const std::vector<std::string>& signals, int depth) {
    if (depth <= 0) {
        switch (rng.int_in(0, 3)) {
        case 0:
            if (!fields.empty()) return datum_field(rng.pick(fields));
            [[fallthrough]];
        case 1:
            if (!signals.empty()) return signal_ref(rng.pick(signals));
            [[fallthrough]];
        case 2: return literal(Value(rng.int_in(-20, 20)));
        default: return literal(Value(rng.real_in(-50, 50)));
        }
    }
    switch (rng.int_in(0, 9)) {
    case 0:
    case 1:
    case 2: { // arithmetic
        static const std::vector<std::string> ops = {"+", "-", "*", "/", "%"};
        auto n = node(ExprKind::Binary);
        n->name = rng.pick(ops);
        n->object = random_supported_expr(rng, fields, signals, depth - 1);
        n->index = random_supported_expr(rng, fields, signals, depth - 1);
        return n;
    }
    case 3: { // comparison feeding a ternary keeps types sensible
        static const std::vector<std::string> ops = {"<", "<=", ">", ">=", "==", "!="};
        auto cmp = node(ExprKind::Binary);
        cmp->name = rng.pick(ops);
        cmp->object = random_supported_expr(rng, fields, signals, depth - 1);
        cmp->index = random_supported_expr(rng, fields, signals, depth - 1);
        auto t = node(ExprKind::Ternary);
        t->object = cmp;
        t->index = random_supported_expr(rng, fields, signals, depth - 1);
        t->third = random_supported_expr(rng, fields, signals, depth - 1);
        return t;
    }
    case 4: { // unary minus
        auto n = node(ExprKind::Unary);
        n->name = "-";
        n->object = random_supported_expr(rng, fields, signals, depth - 1);
        return n;
    }
    case 5: { // single-argument math
        static const std::vector<std::string> fns = {"abs",   "ceil",  "floor",
                                                     "round", "sqrt",  "exp"};
        auto n = node(ExprKind::Call);
        n->name = rng.pick(fns);
        n->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        return n;
    }
    case 6: { // min/max
        auto n = node(ExprKind::Call);
        n->name = rng.chance(0.5) ? "min" : "max";
        n->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        n->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        return n;
    }
    case 7: { // validity predicate through if()
        auto valid = node(ExprKind::Call);
        valid->name = "isValid";
        valid->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        auto n = node(ExprKind::Call);
        n->name = "if";
        n->args.push_back(valid);
        n->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        n->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        return n;
    }
    case 8: { // inrange over an array literal
        auto arr = node(ExprKind::ArrayLit);
        double lo = rng.real_in(-50, 0), hi = rng.real_in(0, 50);
        arr->args.push_back(literal(Value(lo)));
        arr->args.push_back(literal(Value(hi)));
        auto n = node(ExprKind::Call);
        n->name = "inrange";
        n->args.push_back(random_supported_expr(rng, fields, signals, depth - 1));
        n->args.push_back(arr);
        auto t = node(ExprKind::Ternary);
        t->object = n;
        t->index = literal(Value(int64_t(1)));
        t->third = literal(Value(int64_t(0)));
        return t;
    }
    default: return random_supported_expr(rng, fields, signals, 0);
    }
}

} // namespace specfission::testgen
