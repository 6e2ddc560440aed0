#include <algorithm>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/transforms.hpp"

namespace specfission {

namespace {

using nlohmann::json;

bool is_signal_wrapper(const json& j) {
    return j.is_object() && j.contains("signal") && j.at("signal").is_string();
}

void collect_signal_wrappers(const json& j, const std::string& path,
                             std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        if (is_signal_wrapper(j)) {
            out.emplace_back(path + "/signal", j.at("signal").get<std::string>());
            return;
        }
        for (auto it = j.begin(); it != j.end(); ++it)
            collect_signal_wrappers(it.value(), path + "/" + it.key(), out);
    } else if (j.is_array()) {
        for (size_t i = 0; i < j.size(); ++i)
            collect_signal_wrappers(j[i], path + "/" + std::to_string(i), out);
    }
}

const json* find_path(const json& j, const std::string& path) {
    const json* cur = &j;
    size_t pos = 1; // skip leading '/'
    while (pos <= path.size() && pos != 0) {
        size_t next = path.find('/', pos);
        std::string key = path.substr(pos, next == std::string::npos ? next : next - pos);
        if (cur->is_object()) {
            if (!cur->contains(key)) return nullptr;
            cur = &cur->at(key);
        } else if (cur->is_array()) {
            cur = &cur->at(std::stoul(key));
        } else {
            return nullptr;
        }
        pos = next == std::string::npos ? 0 : next + 1;
    }
    return cur;
}

struct OpSchema {
    std::vector<std::string> required;
    std::vector<std::string> allowed;
};

const std::map<std::string, OpSchema>& op_schemas() {
    static const std::map<std::string, OpSchema> k = {
        {"filter", {{"expr"}, {"expr"}}},
        {"formula", {{"expr", "as"}, {"expr", "as"}}},
        {"bin", {{"field", "extent"}, {"field", "extent", "maxbins", "as"}}},
        {"timeunit", {{"field", "units"}, {"field", "units", "as"}}},
        {"aggregate", {{}, {"groupby", "ops", "fields", "as", "filter"}}},
        {"joinaggregate", {{}, {"groupby", "ops", "fields", "as"}}},
        {"window", {{"ops"}, {"groupby", "sort", "ops", "fields", "as", "frame"}}},
        {"collect", {{}, {"sort"}}},
        {"extent", {{"field"}, {"field", "signal"}}},
    };
    return k;
}

const std::set<std::string>& supported_aggregate_ops() {
    static const std::set<std::string> k = {"count", "valid",    "sum",   "mean", "min",
                                            "max",   "variance", "stdev", "median"};
    return k;
}

const std::set<std::string>& supported_window_ops() {
    static const std::set<std::string> k = {"row_number", "rank", "dense_rank", "sum",
                                            "mean",       "min",  "max"};
    return k;
}

std::optional<std::string> check_string_array(const json& j, const char* what) {
    if (!j.is_array()) return std::string(what) + " must be an array";
    for (const auto& e : j)
        if (!e.is_string()) return std::string(what) + " entries must be strings";
    return std::nullopt;
}

// Shared shape of aggregate-style op lists: ops/fields/as arrays.
std::optional<std::string> check_agg_lists(const json& params,
                                           const std::set<std::string>& supported) {
    if (params.contains("groupby"))
        if (auto err = check_string_array(params.at("groupby"), "groupby")) return err;
    size_t n = 1;
    if (params.contains("ops")) {
        const json& ops = params.at("ops");
        if (!ops.is_array()) return "ops must be an array";
        n = ops.size();
        for (const auto& o : ops) {
            if (!o.is_string()) return "ops entries must be strings";
            if (!supported.count(o.get<std::string>()))
                return "unsupported aggregate op '" + o.get<std::string>() + "'";
        }
    }
    if (params.contains("fields")) {
        const json& f = params.at("fields");
        if (!f.is_array() || f.size() != n) return "fields must match ops length";
        for (const auto& e : f)
            if (!e.is_string() && !e.is_null()) return "fields entries must be strings or null";
    }
    if (params.contains("as")) {
        const json& a = params.at("as");
        if (!a.is_array() || a.size() != n) return "as must match ops length";
        for (const auto& e : a)
            if (!e.is_string()) return "as entries must be strings";
    }
    return std::nullopt;
}

std::optional<std::string> check_sort_shape(const json& sort) {
    if (sort.is_null()) return std::nullopt;
    if (!sort.is_object()) return "sort must be an object";
    for (auto it = sort.begin(); it != sort.end(); ++it)
        if (it.key() != "field" && it.key() != "order")
            return "unsupported sort parameter '" + it.key() + "'";
    if (!sort.contains("field")) return "sort requires field";
    const json& f = sort.at("field");
    if (!f.is_string() && check_string_array(f, "sort field")) return "bad sort field";
    if (sort.contains("order")) {
        const json& o = sort.at("order");
        auto ok = [](const json& e) {
            return e.is_string() && (e == "ascending" || e == "descending");
        };
        if (o.is_string() || o.is_array()) {
            if (o.is_string() && !ok(o)) return "bad sort order";
            if (o.is_array())
                for (const auto& e : o)
                    if (!ok(e)) return "bad sort order";
        } else {
            return "bad sort order";
        }
    }
    return std::nullopt;
}

std::vector<SortKey> parse_sort(const json& sort) {
    std::vector<SortKey> keys;
    if (sort.is_null() || !sort.is_object()) return keys;
    std::vector<std::string> fields;
    const json& f = sort.at("field");
    if (f.is_string()) fields.push_back(f.get<std::string>());
    else
        for (const auto& e : f) fields.push_back(e.get<std::string>());
    std::vector<bool> asc(fields.size(), true);
    if (sort.contains("order")) {
        const json& o = sort.at("order");
        if (o.is_string()) {
            std::fill(asc.begin(), asc.end(), o == "ascending");
        } else {
            for (size_t i = 0; i < o.size() && i < asc.size(); ++i)
                asc[i] = o[i] == "ascending";
        }
    }
    for (size_t i = 0; i < fields.size(); ++i) keys.push_back({fields[i], asc[i]});
    return keys;
}

std::string normalized_units(const json& units) {
    if (units.is_string()) return units.get<std::string>();
    std::string out;
    if (units.is_array())
        for (const auto& e : units)
            if (e.is_string()) out += e.get<std::string>();
    return out;
}

bool units_supported(const std::string& u) {
    static const std::set<std::string> k = {"year",    "month", "date",      "hours",
                                            "minutes", "day",   "yearmonth", "yearmonthdate"};
    return k.count(u) > 0;
}

std::vector<AggregateOp> parse_agg_ops(const json& params) {
    std::vector<AggregateOp> out;
    json ops = params.value("ops", json::array({"count"}));
    json fields = params.value("fields", json());
    json as = params.value("as", json());
    for (size_t i = 0; i < ops.size(); ++i) {
        AggregateOp op;
        op.op = ops[i].get<std::string>();
        if (!fields.is_null() && i < fields.size() && fields[i].is_string())
            op.field = fields[i].get<std::string>();
        if (!as.is_null() && i < as.size()) {
            op.as = as[i].get<std::string>();
        } else {
            op.as = op.field ? op.op + "_" + *op.field : op.op;
        }
        out.push_back(std::move(op));
    }
    return out;
}

std::vector<std::string> parse_groupby(const json& params) {
    std::vector<std::string> out;
    for (const auto& g : params.value("groupby", json::array()))
        out.push_back(g.get<std::string>());
    return out;
}

Value resolve_param_value(const json& j, const SignalEnv& signals) {
    if (is_signal_wrapper(j)) {
        ExprPtr e = parse_expression(j.at("signal").get<std::string>());
        return evaluate(e, nullptr, signals);
    }
    return value_from_json(j);
}

} // namespace

bool op_server_supported(const std::string& op) {
    return op_schemas().count(op) > 0;
}

bool op_produces_value(const std::string& op) { return op == "extent"; }

std::vector<std::pair<std::string, std::string>> expression_params(const std::string& op,
                                                                   const json& params) {
    std::vector<std::pair<std::string, std::string>> out;
    if ((op == "filter" || op == "formula") && params.contains("expr") &&
        params.at("expr").is_string())
        out.emplace_back("/expr", params.at("expr").get<std::string>());
    if (op == "aggregate" && params.contains("filter") && params.at("filter").is_string())
        out.emplace_back("/filter", params.at("filter").get<std::string>());
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (op == "extent" && it.key() == "signal") continue; // declaration, not a reference
        collect_signal_wrappers(it.value(), "/" + it.key(), out);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::set<std::string> step_signal_refs(const std::string& op, const json& params) {
    std::set<std::string> out;
    for (const auto& [path, text] : expression_params(op, params)) {
        RefSet refs = analyze(parse_expression(text));
        out.insert(refs.signals.begin(), refs.signals.end());
    }
    return out;
}

std::optional<std::string> step_unsupported_reason(const std::string& op, const json& params) {
    auto schema = op_schemas().find(op);
    if (schema == op_schemas().end()) return "unsupported transform '" + op + "'";
    for (auto it = params.begin(); it != params.end(); ++it) {
        const auto& allowed = schema->second.allowed;
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            return "unsupported parameter '" + it.key() + "' on " + op;
    }
    for (const auto& req : schema->second.required)
        if (!params.contains(req)) return op + " is missing required parameter '" + req + "'";

    // Every embedded expression must parse and stay inside the subset.
    std::vector<std::pair<std::string, std::string>> exprs;
    try {
        exprs = expression_params(op, params);
    } catch (const Error&) {
        return "malformed parameters on " + op;
    }
    for (const auto& [path, text] : exprs) {
        ExprPtr ast;
        try {
            ast = parse_expression(text);
        } catch (const Error& e) {
            return "expression at " + path + " does not parse: " + e.what();
        }
        if (!is_supported(ast)) return "expression at " + path + " is outside the subset";
    }

    if (op == "filter" && !params.at("expr").is_string()) return "filter expr must be a string";
    if (op == "formula") {
        if (!params.at("expr").is_string()) return "formula expr must be a string";
        if (!params.at("as").is_string()) return "formula as must be a string";
    }
    if (op == "bin") {
        if (!params.at("field").is_string()) return "bin field must be a string";
        const json& extent = params.at("extent");
        if (!is_signal_wrapper(extent)) {
            if (!extent.is_array() || extent.size() != 2 || !extent[0].is_number() ||
                !extent[1].is_number())
                return "bin extent must be [lo, hi] or a signal reference";
        }
        if (params.contains("maxbins") && !params.at("maxbins").is_number() &&
            !is_signal_wrapper(params.at("maxbins")))
            return "bin maxbins must be a number or signal reference";
        if (params.contains("as")) {
            if (auto err = check_string_array(params.at("as"), "bin as")) return err;
            if (params.at("as").size() != 2) return "bin as must name two fields";
        }
    }
    if (op == "timeunit") {
        if (!params.at("field").is_string()) return "timeunit field must be a string";
        std::string u = normalized_units(params.at("units"));
        if (!units_supported(u)) return "unsupported timeunit '" + u + "'";
        if (params.contains("as")) {
            if (auto err = check_string_array(params.at("as"), "timeunit as")) return err;
            if (params.at("as").size() != 2) return "timeunit as must name two fields";
        }
    }
    if (op == "aggregate" || op == "joinaggregate") {
        if (auto err = check_agg_lists(params, supported_aggregate_ops())) return err;
        for (const auto& o : parse_agg_ops(params))
            if (o.op != "count" && !o.field)
                return "aggregate op '" + o.op + "' requires a field";
    }
    if (op == "window") {
        if (auto err = check_agg_lists(params, supported_window_ops())) return err;
        if (params.contains("sort"))
            if (auto err = check_sort_shape(params.at("sort"))) return err;
        if (params.contains("frame")) {
            const json& fr = params.at("frame");
            if (!(fr.is_array() && fr.size() == 2 && fr[0].is_null() && fr[1].is_number() &&
                  fr[1].get<double>() == 0))
                return "only the default window frame is supported";
        }
        for (const auto& o : parse_agg_ops(params))
            if (o.op != "row_number" && o.op != "rank" && o.op != "dense_rank" && !o.field)
                return "window op '" + o.op + "' requires a field";
    }
    if (op == "collect" && params.contains("sort"))
        if (auto err = check_sort_shape(params.at("sort"))) return err;
    if (op == "extent") {
        if (!params.at("field").is_string()) return "extent field must be a string";
        if (params.contains("signal") && !params.at("signal").is_string())
            return "extent signal must be a string";
    }
    return std::nullopt;
}

json canonicalize_step_params(const std::string& op, const json& params) {
    json out = params;
    for (const auto& [path, text] : expression_params(op, params)) {
        std::string canon = print_expression(parse_expression(text));
        json* slot = const_cast<json*>(find_path(out, path));
        if (slot) *slot = canon;
    }
    return out;
}

TransformResult apply_transform(const std::string& op, const json& params, const Table& input,
                                const SignalEnv& signals) {
    if (op == "filter") {
        ExprPtr pred = parse_expression(params.at("expr").get<std::string>());
        return transform_filter(input, pred, signals);
    }
    if (op == "formula") {
        ExprPtr expr = parse_expression(params.at("expr").get<std::string>());
        return transform_formula(input, expr, params.at("as").get<std::string>(), signals);
    }
    if (op == "bin") {
        Value extent = resolve_param_value(params.at("extent"), signals);
        if (!extent.is_list() || extent.as_list().size() < 2 ||
            !extent.as_list()[0].is_number() || !extent.as_list()[1].is_number())
            throw Error(ErrorCode::DegenerateExtent, "bin extent did not resolve to [lo, hi]");
        double lo = extent.as_list()[0].number_as_double();
        double hi = extent.as_list()[1].number_as_double();
        int maxbins = 10;
        if (params.contains("maxbins")) {
            Value mb = resolve_param_value(params.at("maxbins"), signals);
            if (!mb.is_number()) throw Error(ErrorCode::TypeError, "maxbins must be numeric");
            maxbins = static_cast<int>(mb.number_as_double());
        }
        std::string as0 = "bin0", as1 = "bin1";
        if (params.contains("as")) {
            as0 = params.at("as")[0].get<std::string>();
            as1 = params.at("as")[1].get<std::string>();
        }
        return transform_bin(input, params.at("field").get<std::string>(),
                             nice_bin_params(lo, hi, maxbins), as0, as1);
    }
    if (op == "timeunit") {
        std::string as0 = "unit0", as1 = "unit1";
        if (params.contains("as")) {
            as0 = params.at("as")[0].get<std::string>();
            as1 = params.at("as")[1].get<std::string>();
        }
        return transform_timeunit(input, params.at("field").get<std::string>(),
                                  normalized_units(params.at("units")), as0, as1);
    }
    if (op == "aggregate") {
        ExprPtr pre_filter;
        if (params.contains("filter"))
            pre_filter = parse_expression(params.at("filter").get<std::string>());
        return transform_aggregate(input, parse_groupby(params), parse_agg_ops(params),
                                   pre_filter, signals);
    }
    if (op == "joinaggregate") {
        return transform_joinaggregate(input, parse_groupby(params), parse_agg_ops(params));
    }
    if (op == "window") {
        std::vector<WindowOp> ops;
        for (const auto& a : parse_agg_ops(params)) ops.push_back({a.op, a.field, a.as});
        return transform_window(input, parse_groupby(params),
                                parse_sort(params.value("sort", json())), ops);
    }
    if (op == "collect") {
        return transform_collect(input, parse_sort(params.value("sort", json())));
    }
    if (op == "extent") {
        return transform_extent(input, params.at("field").get<std::string>());
    }
    throw Error(ErrorCode::TransformError, "unsupported transform '" + op + "'");
}

} // namespace specfission
