#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "specfission/expr.hpp"
#include "specfission/table.hpp"

namespace specfission {

struct BinParams {
    double start = 0;
    double stop = 0;
    double step = 1;
};

/// Smallest step of the form {1,2,5}*10^z with ceil((hi-lo)/step) <= maxbins;
/// start/stop snap outward to step multiples. Throws DegenerateExtent when
/// lo >= hi.
BinParams nice_bin_params(double lo, double hi, int maxbins);

struct AggregateOp {
    std::string op; // count valid sum mean min max variance stdev median
    std::optional<std::string> field;
    std::string as;
};

struct SortKey {
    std::string field;
    bool ascending = true;
};

struct WindowOp {
    std::string op; // row_number rank dense_rank sum mean min max
    std::optional<std::string> field;
    std::string as;
};

Table transform_filter(const Table& t, const ExprPtr& predicate, const SignalEnv& signals);
Table transform_formula(const Table& t, const ExprPtr& expr, const std::string& as,
                        const SignalEnv& signals);
Table transform_bin(const Table& t, const std::string& field, const BinParams& params,
                    const std::string& as0, const std::string& as1);
Table transform_timeunit(const Table& t, const std::string& field, const std::string& units,
                         const std::string& as0, const std::string& as1);
/// Optional pre_filter is applied to rows before grouping (a filtered
/// aggregate, one node instead of a filter/aggregate pair).
Table transform_aggregate(const Table& t, const std::vector<std::string>& groupby,
                          const std::vector<AggregateOp>& ops,
                          const ExprPtr& pre_filter = nullptr,
                          const SignalEnv& signals = nullptr);
Table transform_joinaggregate(const Table& t, const std::vector<std::string>& groupby,
                              const std::vector<AggregateOp>& ops);
Table transform_window(const Table& t, const std::vector<std::string>& partition_by,
                       const std::vector<SortKey>& sort, const std::vector<WindowOp>& ops);
Table transform_collect(const Table& t, const std::vector<SortKey>& sort);
/// [min, max] over non-null cells; [null, null] when none.
Value transform_extent(const Table& t, const std::string& field);

// ---------------------------------------------------------------------------
// Generic step interface over Vega-shaped transform parameter documents.
// This is the single place that knows each op's parameter schema; the
// planner, the oracle and the task runtime all go through it.

using TransformResult = std::variant<Table, Value>;

/// Execute one step. `params` uses the spec dialect ({"type":...} removed,
/// op passed separately). Signal references inside parameters are resolved
/// against `signals`.
TransformResult apply_transform(const std::string& op, const nlohmann::json& params,
                                const Table& input, const SignalEnv& signals);

/// The server-executable op set.
bool op_server_supported(const std::string& op);

/// Static supportability: recognized op, whitelisted parameters, required
/// parameters present and well-shaped, all embedded expressions parse and
/// pass is_supported. Returns the first reason the step must stay on the
/// client, or nullopt when the server can run it.
std::optional<std::string> step_unsupported_reason(const std::string& op,
                                                   const nlohmann::json& params);

/// (json-pointer path, expression text) for every parameter that holds an
/// expression: filter/formula "/expr", aggregate "/filter", and any
/// {"signal": "<expr>"} wrapper anywhere in the document.
std::vector<std::pair<std::string, std::string>> expression_params(const std::string& op,
                                                                   const nlohmann::json& params);

/// Signal names referenced by any of the step's expressions (sorted).
std::set<std::string> step_signal_refs(const std::string& op, const nlohmann::json& params);

/// Rewrite every expression parameter to its canonical printed form; used
/// before fingerprinting so equivalent spellings share cache entries.
nlohmann::json canonicalize_step_params(const std::string& op, const nlohmann::json& params);

/// Steps producing a Value instead of a Table (extent). Such steps pass the
/// input table through unchanged in a dataset chain and expose the value
/// under their declared signal name.
bool op_produces_value(const std::string& op);

} // namespace specfission
