#include "specfission/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/time_util.hpp"

namespace specfission {

namespace {

class TableRowContext : public RowContext {
  public:
    explicit TableRowContext(const Table& t) : t_(t) {}
    void set_row(size_t row) { row_ = row; }
    Value field(const std::string& name) const override {
        const Column* c = t_.find_column(name);
        return c ? c->get(row_) : Value();
    }

  private:
    const Table& t_;
    size_t row_ = 0;
};

Table add_or_replace_columns(const Table& t, std::vector<Column> extra) {
    std::vector<Column> cols;
    cols.reserve(t.ncols() + extra.size());
    for (const auto& c : t.columns()) {
        bool replaced = false;
        for (const auto& e : extra)
            if (e.name == c.name) replaced = true;
        if (!replaced) cols.push_back(c);
    }
    for (auto& e : extra) cols.push_back(std::move(e));
    return Table(std::move(cols), t.nrows());
}

/// Column from arbitrary produced values under the lub lattice
/// (int < float < string; bool/ts mix with others as string).
Column column_from_values(const std::string& name, const std::vector<Value>& values) {
    bool any = false, all_int = true, all_num = true, all_bool = true, all_ts = true,
         all_str = true;
    for (const auto& v : values) {
        if (v.is_null()) continue;
        if (v.is_list()) throw Error(ErrorCode::TypeError, "cannot store a list in a column");
        any = true;
        all_int = all_int && v.is_int();
        all_num = all_num && v.is_number();
        all_bool = all_bool && v.is_bool();
        all_ts = all_ts && v.is_timestamp();
        all_str = all_str && v.is_string();
    }
    DataType type;
    if (!any) type = DataType::Float64;
    else if (all_bool) type = DataType::Bool;
    else if (all_int) type = DataType::Int64;
    else if (all_num) type = DataType::Float64;
    else if (all_ts) type = DataType::Timestamp;
    else if (all_str) type = DataType::String;
    else type = DataType::String;

    Column c = Column::make(name, type);
    for (const auto& v : values) {
        if (v.is_null()) c.push_null();
        else if (type == DataType::Float64 && v.is_int())
            c.push(Value(static_cast<double>(v.as_int())));
        else if (type == DataType::String && !v.is_string())
            c.push(v.is_timestamp() ? Value(format_iso8601(v.as_timestamp().ms))
                                    : Value(value_to_string(v)));
        else c.push(v);
    }
    return c;
}

} // namespace

// ---------------------------------------------------------------------------
// Row-level transforms

Table transform_filter(const Table& t, const ExprPtr& predicate, const SignalEnv& signals) {
    TableRowContext ctx(t);
    std::vector<size_t> keep;
    for (size_t r = 0; r < t.nrows(); ++r) {
        ctx.set_row(r);
        Value v = evaluate(predicate, &ctx, signals);
        if (!v.is_bool())
            throw Error(ErrorCode::TypeError,
                        "filter predicate must be boolean, got " + v.type_name());
        if (v.as_bool()) keep.push_back(r);
    }
    return take_rows(t, keep);
}

Table transform_formula(const Table& t, const ExprPtr& expr, const std::string& as,
                        const SignalEnv& signals) {
    TableRowContext ctx(t);
    std::vector<Value> values;
    values.reserve(t.nrows());
    for (size_t r = 0; r < t.nrows(); ++r) {
        ctx.set_row(r);
        values.push_back(evaluate(expr, &ctx, signals));
    }
    std::vector<Column> extra;
    extra.push_back(column_from_values(as, values));
    return add_or_replace_columns(t, std::move(extra));
}

// ---------------------------------------------------------------------------
// Binning

BinParams nice_bin_params(double lo, double hi, int maxbins) {
    if (!(lo < hi))
        throw Error(ErrorCode::DegenerateExtent,
                    "degenerate extent [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (maxbins < 1) throw Error(ErrorCode::DegenerateExtent, "maxbins must be >= 1");
    double span = hi - lo;
    int z = static_cast<int>(std::floor(std::log10(span / maxbins))) - 1;
    static const double mult[] = {1.0, 2.0, 5.0};
    for (int iter = 0; iter < 64; ++iter, ++z) {
        for (double m : mult) {
            double step = m * std::pow(10.0, z);
            double nbins = std::ceil(span / step - 1e-9);
            if (nbins <= maxbins) {
                BinParams p;
                p.step = step;
                p.start = std::floor(lo / step + 1e-9) * step;
                p.stop = std::ceil(hi / step - 1e-9) * step;
                return p;
            }
        }
    }
    throw Error(ErrorCode::DegenerateExtent, "no nice step found");
}

Table transform_bin(const Table& t, const std::string& field, const BinParams& p,
                    const std::string& as0, const std::string& as1) {
    const Column& src = t.require_column(field);
    if (src.type != DataType::Int64 && src.type != DataType::Float64)
        throw Error(ErrorCode::NonNumericField, "bin field '" + field + "' is not numeric");
    double nbins = std::max(1.0, std::round((p.stop - p.start) / p.step));
    Column b0 = Column::make(as0, DataType::Float64);
    Column b1 = Column::make(as1, DataType::Float64);
    for (size_t r = 0; r < t.nrows(); ++r) {
        if (src.is_null(r)) {
            b0.push_null();
            b1.push_null();
            continue;
        }
        double v = src.as_double(r);
        if (std::isnan(v) || v < p.start || v > p.stop) {
            b0.push_null();
            b1.push_null();
            continue;
        }
        double idx = std::floor((v - p.start) / p.step);
        if (idx >= nbins) idx = nbins - 1; // v == stop lands in the last bin
        double lo = p.start + idx * p.step;
        b0.push(Value(lo));
        b1.push(Value(lo + p.step));
    }
    std::vector<Column> extra;
    extra.push_back(std::move(b0));
    extra.push_back(std::move(b1));
    return add_or_replace_columns(t, std::move(extra));
}

// ---------------------------------------------------------------------------
// Time units

namespace {

int64_t timeunit_floor(int64_t ms, const std::string& units) {
    CivilTime c = civil_from_ms(ms);
    c.ms = 0;
    c.second = 0;
    if (units == "minutes") {
    } else if (units == "hours") {
        c.minute = 0;
    } else if (units == "date" || units == "yearmonthdate") {
        c.minute = 0;
        c.hour = 0;
    } else if (units == "month" || units == "yearmonth") {
        c.minute = 0;
        c.hour = 0;
        c.day = 1;
    } else if (units == "year") {
        c.minute = 0;
        c.hour = 0;
        c.day = 1;
        c.month = 1;
    } else if (units == "day") {
        // Weekday anchored to the week of 2012-01-01, a Sunday.
        int w = weekday_from_days(days_from_civil(c.year, c.month, c.day));
        return (days_from_civil(2012, 1, 1) + w) * 86400000;
    } else {
        throw Error(ErrorCode::TransformError, "unsupported timeunit '" + units + "'");
    }
    return ms_from_civil(c);
}

int64_t timeunit_next(int64_t floor_ms, const std::string& units) {
    if (units == "minutes") return floor_ms + 60000;
    if (units == "hours") return floor_ms + 3600000;
    if (units == "date" || units == "yearmonthdate" || units == "day")
        return floor_ms + 86400000;
    CivilTime c = civil_from_ms(floor_ms);
    if (units == "year") {
        c.year += 1;
    } else { // month, yearmonth
        c.month += 1;
        if (c.month > 12) {
            c.month = 1;
            c.year += 1;
        }
    }
    return ms_from_civil(c);
}

const std::set<std::string>& supported_timeunits() {
    static const std::set<std::string> k = {"year",    "month", "date",      "hours",
                                            "minutes", "day",   "yearmonth", "yearmonthdate"};
    return k;
}

} // namespace

Table transform_timeunit(const Table& t, const std::string& field, const std::string& units,
                         const std::string& as0, const std::string& as1) {
    const Column& src = t.require_column(field);
    if (src.type != DataType::Timestamp)
        throw Error(ErrorCode::NonTimestampField,
                    "timeunit field '" + field + "' is not a timestamp");
    if (!supported_timeunits().count(units))
        throw Error(ErrorCode::TransformError, "unsupported timeunit '" + units + "'");
    Column u0 = Column::make(as0, DataType::Timestamp);
    Column u1 = Column::make(as1, DataType::Timestamp);
    for (size_t r = 0; r < t.nrows(); ++r) {
        if (src.is_null(r)) {
            u0.push_null();
            u1.push_null();
            continue;
        }
        int64_t f = timeunit_floor(src.ints()[r], units);
        u0.push(Value(Timestamp{f}));
        u1.push(Value(Timestamp{timeunit_next(f, units)}));
    }
    std::vector<Column> extra;
    extra.push_back(std::move(u0));
    extra.push_back(std::move(u1));
    return add_or_replace_columns(t, std::move(extra));
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

struct KeyLess {
    bool operator()(const std::vector<Value>& a, const std::vector<Value>& b) const {
        for (size_t i = 0; i < a.size() && i < b.size(); ++i) {
            int c = canonical_compare(a[i], b[i]);
            if (c != 0) return c < 0;
        }
        return a.size() < b.size();
    }
};

using GroupMap = std::map<std::vector<Value>, std::vector<size_t>, KeyLess>;

GroupMap group_rows(const Table& t, const std::vector<std::string>& groupby,
                    const std::vector<size_t>& rows) {
    std::vector<const Column*> keys;
    keys.reserve(groupby.size());
    for (const auto& g : groupby) keys.push_back(&t.require_column(g));
    GroupMap groups;
    std::vector<Value> key(groupby.size());
    for (size_t r : rows) {
        for (size_t k = 0; k < keys.size(); ++k) key[k] = keys[k]->get(r);
        groups[key].push_back(r);
    }
    return groups;
}

bool numeric_agg_op(const std::string& op) {
    return op == "sum" || op == "mean" || op == "variance" || op == "stdev" || op == "median";
}

void check_aggregate_ops(const Table& t, const std::vector<AggregateOp>& ops) {
    for (const auto& op : ops) {
        if (op.op == "count") continue;
        if (!op.field)
            throw Error(ErrorCode::NonNumericAggregate, op.op + " requires a field");
        const Column& c = t.require_column(*op.field);
        if (numeric_agg_op(op.op) && c.type != DataType::Int64 && c.type != DataType::Float64)
            throw Error(ErrorCode::NonNumericAggregate,
                        op.op + " requires a numeric field, got " +
                            data_type_name(c.type) + " '" + *op.field + "'");
    }
}

/// One aggregate value over the given rows; null when no valid input
/// contributes (except count/valid which are always defined).
Value aggregate_value(const Table& t, const AggregateOp& op, const std::vector<size_t>& rows) {
    if (op.op == "count") return Value(static_cast<int64_t>(rows.size()));
    const Column& c = t.require_column(*op.field);
    if (op.op == "valid") {
        int64_t n = 0;
        for (size_t r : rows)
            if (!c.is_null(r)) ++n;
        return Value(n);
    }
    if (op.op == "min" || op.op == "max") {
        bool found = false;
        Value best;
        for (size_t r : rows) {
            if (c.is_null(r)) continue;
            Value v = c.get(r);
            if (v.is_float() && std::isnan(v.as_float())) continue; // min/max ignore NaN
            if (!found || (op.op == "min" ? canonical_compare(v, best) < 0
                                          : canonical_compare(v, best) > 0)) {
                best = v;
                found = true;
            }
        }
        return found ? best : Value();
    }
    // Numeric reductions ignore nulls; sum/mean propagate NaN.
    std::vector<double> vals;
    bool all_int = c.type == DataType::Int64;
    for (size_t r : rows) {
        if (c.is_null(r)) continue;
        vals.push_back(c.as_double(r));
    }
    if (vals.empty()) return Value();
    if (op.op == "sum") {
        double s = std::accumulate(vals.begin(), vals.end(), 0.0);
        if (all_int) return Value(static_cast<int64_t>(s));
        return Value(s);
    }
    if (op.op == "mean")
        return Value(std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size());
    if (op.op == "variance" || op.op == "stdev") {
        if (vals.size() < 2) return Value();
        double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
        double ss = 0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        double var = ss / (vals.size() - 1);
        return Value(op.op == "variance" ? var : std::sqrt(var));
    }
    if (op.op == "median") {
        std::sort(vals.begin(), vals.end());
        size_t n = vals.size();
        if (n % 2 == 1) return Value(vals[n / 2]);
        return Value((vals[n / 2 - 1] + vals[n / 2]) / 2.0);
    }
    throw Error(ErrorCode::NonNumericAggregate, "unknown aggregate op '" + op.op + "'");
}

DataType aggregate_output_type(const Table& t, const AggregateOp& op) {
    if (op.op == "count" || op.op == "valid") return DataType::Int64;
    const Column& c = t.require_column(*op.field);
    if (op.op == "min" || op.op == "max") return c.type;
    if (op.op == "sum") return c.type == DataType::Int64 ? DataType::Int64 : DataType::Float64;
    return DataType::Float64;
}

} // namespace

Table transform_aggregate(const Table& t, const std::vector<std::string>& groupby,
                          const std::vector<AggregateOp>& ops, const ExprPtr& pre_filter,
                          const SignalEnv& signals) {
    check_aggregate_ops(t, ops);
    std::vector<size_t> rows;
    if (pre_filter) {
        TableRowContext ctx(t);
        for (size_t r = 0; r < t.nrows(); ++r) {
            ctx.set_row(r);
            Value v = evaluate(pre_filter, &ctx, signals);
            if (!v.is_bool())
                throw Error(ErrorCode::TypeError, "aggregate filter must be boolean");
            if (v.as_bool()) rows.push_back(r);
        }
    } else {
        rows.resize(t.nrows());
        std::iota(rows.begin(), rows.end(), 0);
    }

    std::vector<Column> out;
    for (const auto& g : groupby) out.push_back(Column::make(g, t.require_column(g).type));
    for (const auto& op : ops) out.push_back(Column::make(op.as, aggregate_output_type(t, op)));

    size_t nout = 0;
    if (groupby.empty()) {
        // Always exactly one row; empty input keeps count=0, the rest null.
        for (size_t i = 0; i < ops.size(); ++i) {
            Value v = rows.empty() && ops[i].op != "count" && ops[i].op != "valid"
                          ? Value()
                          : aggregate_value(t, ops[i], rows);
            out[i].push(v);
        }
        nout = 1;
    } else {
        GroupMap groups = group_rows(t, groupby, rows);
        for (const auto& [key, members] : groups) {
            for (size_t k = 0; k < groupby.size(); ++k) out[k].push(key[k]);
            for (size_t i = 0; i < ops.size(); ++i)
                out[groupby.size() + i].push(aggregate_value(t, ops[i], members));
            ++nout;
        }
    }
    return Table(std::move(out), nout);
}

Table transform_joinaggregate(const Table& t, const std::vector<std::string>& groupby,
                              const std::vector<AggregateOp>& ops) {
    check_aggregate_ops(t, ops);
    std::vector<size_t> all(t.nrows());
    std::iota(all.begin(), all.end(), 0);

    std::vector<Column> extra;
    for (const auto& op : ops) extra.push_back(Column::make(op.as, aggregate_output_type(t, op)));

    if (groupby.empty()) {
        std::vector<Value> vals;
        for (const auto& op : ops)
            vals.push_back(t.nrows() == 0 && op.op != "count" && op.op != "valid"
                               ? Value()
                               : aggregate_value(t, op, all));
        for (size_t r = 0; r < t.nrows(); ++r)
            for (size_t i = 0; i < ops.size(); ++i) extra[i].push(vals[i]);
    } else {
        GroupMap groups = group_rows(t, groupby, all);
        std::vector<std::vector<Value>> per_row(t.nrows());
        for (const auto& [key, members] : groups) {
            std::vector<Value> vals;
            for (const auto& op : ops) vals.push_back(aggregate_value(t, op, members));
            for (size_t r : members) per_row[r] = vals;
        }
        for (size_t r = 0; r < t.nrows(); ++r)
            for (size_t i = 0; i < ops.size(); ++i) extra[i].push(per_row[r][i]);
    }
    return add_or_replace_columns(t, std::move(extra));
}

// ---------------------------------------------------------------------------
// Window

Table transform_window(const Table& t, const std::vector<std::string>& partition_by,
                       const std::vector<SortKey>& sort, const std::vector<WindowOp>& ops) {
    for (const auto& k : sort) t.require_column(k.field);
    for (const auto& op : ops) {
        if (op.op != "row_number" && op.op != "rank" && op.op != "dense_rank") {
            if (!op.field)
                throw Error(ErrorCode::NonNumericAggregate, op.op + " requires a field");
            const Column& c = t.require_column(*op.field);
            if ((op.op == "sum" || op.op == "mean") && c.type != DataType::Int64 &&
                c.type != DataType::Float64)
                throw Error(ErrorCode::NonNumericAggregate,
                            "window " + op.op + " requires a numeric field");
        }
    }

    std::vector<size_t> all(t.nrows());
    std::iota(all.begin(), all.end(), 0);
    GroupMap partitions = group_rows(t, partition_by, all);

    std::vector<std::pair<std::string, bool>> sort_keys;
    for (const auto& k : sort) sort_keys.emplace_back(k.field, k.ascending);

    std::vector<Column> extra;
    for (const auto& op : ops) {
        DataType type = DataType::Int64;
        if (op.op == "sum") {
            type = t.require_column(*op.field).type == DataType::Int64 ? DataType::Int64
                                                                       : DataType::Float64;
        } else if (op.op == "mean") {
            type = DataType::Float64;
        } else if (op.op == "min" || op.op == "max") {
            type = t.require_column(*op.field).type;
        }
        extra.push_back(Column::make(op.as, type, t.nrows()));
    }

    std::vector<const Column*> sort_cols;
    for (const auto& k : sort) sort_cols.push_back(&t.require_column(k.field));
    auto sort_equal = [&](size_t a, size_t b) {
        for (const auto* c : sort_cols)
            if (canonical_compare(c->get(a), c->get(b)) != 0) return false;
        return true;
    };

    for (auto& [key, members] : partitions) {
        // Stable order within the partition by the sort keys.
        std::vector<size_t> order = members;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            for (size_t k = 0; k < sort_cols.size(); ++k) {
                int c = canonical_compare(sort_cols[k]->get(a), sort_cols[k]->get(b));
                if (c != 0) return sort[k].ascending ? c < 0 : c > 0;
            }
            return false;
        });

        for (size_t oi = 0; oi < ops.size(); ++oi) {
            const WindowOp& op = ops[oi];
            Column& dst = extra[oi];
            if (op.op == "row_number") {
                for (size_t i = 0; i < order.size(); ++i) {
                    dst.validity[order[i]] = 1;
                    std::get<std::vector<int64_t>>(dst.data)[order[i]] =
                        static_cast<int64_t>(i + 1);
                }
            } else if (op.op == "rank" || op.op == "dense_rank") {
                int64_t rank = 0, dense = 0;
                for (size_t i = 0; i < order.size(); ++i) {
                    if (i == 0 || !sort_equal(order[i], order[i - 1])) {
                        rank = static_cast<int64_t>(i + 1);
                        ++dense;
                    }
                    dst.validity[order[i]] = 1;
                    std::get<std::vector<int64_t>>(dst.data)[order[i]] =
                        op.op == "rank" ? rank : dense;
                }
            } else {
                // Cumulative frame: rows from partition start through the
                // current row; nulls skipped, sum/mean propagate NaN,
                // min/max ignore it.
                const Column& src = t.require_column(*op.field);
                double sum = 0;
                int64_t n = 0;
                bool found = false;
                Value best;
                for (size_t i = 0; i < order.size(); ++i) {
                    size_t r = order[i];
                    if (!src.is_null(r)) {
                        if (op.op == "sum" || op.op == "mean") {
                            sum += src.as_double(r);
                            ++n;
                        } else {
                            Value v = src.get(r);
                            if (!(v.is_float() && std::isnan(v.as_float()))) {
                                if (!found ||
                                    (op.op == "min" ? canonical_compare(v, best) < 0
                                                    : canonical_compare(v, best) > 0)) {
                                    best = v;
                                    found = true;
                                }
                            }
                        }
                    }
                    Value out;
                    if (op.op == "sum" && n > 0)
                        out = dst.type == DataType::Int64 ? Value(static_cast<int64_t>(sum))
                                                          : Value(sum);
                    else if (op.op == "mean" && n > 0) out = Value(sum / n);
                    else if ((op.op == "min" || op.op == "max") && found) out = best;
                    if (!out.is_null()) {
                        dst.validity[r] = 1;
                        std::visit(
                            [&](auto& vec) {
                                using T = std::decay_t<decltype(vec)>;
                                if constexpr (std::is_same_v<T, std::vector<int64_t>>)
                                    vec[r] = out.is_timestamp() ? out.as_timestamp().ms
                                                                : out.as_int();
                                else if constexpr (std::is_same_v<T, std::vector<double>>)
                                    vec[r] = out.number_as_double();
                                else if constexpr (std::is_same_v<T, std::vector<uint8_t>>)
                                    vec[r] = out.as_bool() ? 1 : 0;
                                else vec[r] = out.as_string();
                            },
                            dst.data);
                    }
                }
            }
        }
    }
    return add_or_replace_columns(t, std::move(extra));
}

Table transform_collect(const Table& t, const std::vector<SortKey>& sort) {
    std::vector<std::pair<std::string, bool>> keys;
    for (const auto& k : sort) keys.emplace_back(k.field, k.ascending);
    return take_rows(t, sorted_row_order(t, keys));
}

Value transform_extent(const Table& t, const std::string& field) {
    const Column& c = t.require_column(field);
    if (c.type == DataType::Bool || c.type == DataType::String)
        throw Error(ErrorCode::NonNumericField,
                    "extent field '" + field + "' is not numeric or timestamp");
    bool found = false;
    Value lo, hi;
    for (size_t r = 0; r < t.nrows(); ++r) {
        if (c.is_null(r)) continue;
        Value v = c.get(r);
        if (v.is_float() && std::isnan(v.as_float())) continue;
        if (!found) {
            lo = hi = v;
            found = true;
        } else {
            if (canonical_compare(v, lo) < 0) lo = v;
            if (canonical_compare(v, hi) > 0) hi = v;
        }
    }
    return Value(ValueList{lo, hi});
}

} // namespace specfission
