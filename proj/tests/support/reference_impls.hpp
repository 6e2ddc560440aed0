#pragma once

// Naive row-at-a-time reference implementations used as oracles in property
// tests. Deliberately independent of the columnar engine: boxed rows,
// straightforward loops, no shared kernels.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specfission/expr.hpp"
#include "specfission/table.hpp"
#include "specfission/transforms.hpp"

namespace specfission::testref {

using Row = std::map<std::string, Value>;

std::vector<Row> table_rows(const Table& t);

/// Independent tree-walking evaluator for the frozen expression semantics.
/// Throws Error like the engine does.
Value ref_evaluate(const ExprPtr& ast, const Row& datum,
                   const std::map<std::string, Value>& signals);

std::vector<Row> ref_filter(const std::vector<Row>& rows, const ExprPtr& pred,
                            const std::map<std::string, Value>& signals);
std::vector<Row> ref_formula(const std::vector<Row>& rows, const ExprPtr& expr,
                             const std::string& as,
                             const std::map<std::string, Value>& signals);
std::vector<Row> ref_bin(const std::vector<Row>& rows, const std::string& field,
                         const BinParams& p, const std::string& as0, const std::string& as1);
std::vector<Row> ref_timeunit(const std::vector<Row>& rows, const std::string& field,
                              const std::string& units, const std::string& as0,
                              const std::string& as1);
std::vector<Row> ref_aggregate(const std::vector<Row>& rows,
                               const std::vector<std::string>& groupby,
                               const std::vector<AggregateOp>& ops);
std::vector<Row> ref_joinaggregate(const std::vector<Row>& rows,
                                   const std::vector<std::string>& groupby,
                                   const std::vector<AggregateOp>& ops);
std::vector<Row> ref_window(const std::vector<Row>& rows,
                            const std::vector<std::string>& partition_by,
                            const std::vector<SortKey>& sort, const std::vector<WindowOp>& ops);
std::vector<Row> ref_collect(const std::vector<Row>& rows, const std::vector<SortKey>& sort);
Value ref_extent(const std::vector<Row>& rows, const std::string& field);

/// Exhaustive candidate-step search over {1,2,5}*10^z.
BinParams ref_nice_bin_params(double lo, double hi, int maxbins);

/// Order-insensitive comparison of an engine table against reference rows,
/// 1e-9 relative float tolerance.
bool rows_match(const Table& actual, const std::vector<Row>& expected, std::string* why);

} // namespace specfission::testref
