#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "specfission/expr.hpp"

namespace specfission {

/// One transform step. op and the raw parameter document are preserved
/// verbatim (including unrecognized ops) so re-emission is faithful;
/// parsed_exprs carries the ASTs of every parameter recognized as an
/// expression, unparsed the paths whose expressions failed to parse.
struct TransformSpec {
    std::string op;
    nlohmann::json params;
    std::vector<std::pair<std::string, ExprPtr>> parsed_exprs;
    std::vector<std::string> unparsed;

    /// The signal name an extent step declares, if any.
    std::optional<std::string> declared_signal() const;
};

struct UrlSource {
    std::string url;
    std::string format;          // resolved kind: "csv" or "json"
    nlohmann::json format_json;  // original format document, re-emitted as-is
    bool format_supported = true;
};
struct InlineSource {
    nlohmann::json values;
};
struct NamedSource {
    std::string dataset;
};
struct NoSource {};

using DatasetSource = std::variant<NoSource, UrlSource, InlineSource, NamedSource>;

struct DatasetDef {
    std::string name;
    DatasetSource source;
    std::vector<TransformSpec> transforms;
    nlohmann::json extra; // unmodeled dataset keys, preserved for emission
};

struct SignalDef {
    std::string name;
    nlohmann::json raw;           // the full original signal object
    std::optional<Value> initial; // from "value" when representable
    bool interactive = false;     // has "on" or "bind" clauses
    ExprPtr update_expr;          // parsed "update", when present and parseable

    static SignalDef make(const std::string& name, const Value& initial);
};

/// Parsed visualization specification. Everything that is not a dataset or
/// signal lands in remainder and is re-emitted untouched.
struct VisSpec {
    std::vector<DatasetDef> datasets;
    std::vector<SignalDef> signals;
    nlohmann::json remainder;

    const DatasetDef* find_dataset(const std::string& name) const;
    const SignalDef* find_signal(const std::string& name) const;

    /// Signal names declared by extent steps: name -> (dataset, step index).
    std::map<std::string, std::pair<std::string, int>> derived_signals() const;
};

/// Dependency graph over dataset steps and signals. Step 0 is the raw
/// source; step k >= 1 is transforms[k-1].
struct DepNode {
    enum class Kind { DatasetStep, Signal };
    Kind kind = Kind::Signal;
    std::string name;
    int step = 0; // DatasetStep only

    auto operator<=>(const DepNode&) const = default;

    static DepNode dataset_step(std::string name, int step) {
        return {Kind::DatasetStep, std::move(name), step};
    }
    static DepNode signal(std::string name) { return {Kind::Signal, std::move(name), 0}; }

    std::string str() const;
};

struct DepGraph {
    std::set<DepNode> nodes;
    std::set<std::pair<DepNode, DepNode>> edges; // dependency -> dependent

    bool operator==(const DepGraph&) const = default;

    /// All nodes in a dependency-respecting order.
    std::vector<DepNode> topological_order() const;
};

/// Errors: MalformedDocument, DuplicateName.
VisSpec parse_spec(const std::string& document);
VisSpec spec_from_json(const nlohmann::json& doc);

/// Errors: CyclicDependency.
DepGraph dependency_graph(const VisSpec& spec);

std::string emit_spec(const VisSpec& spec);
nlohmann::json spec_to_json(const VisSpec& spec);

/// Semantic equality: equal emitted documents (key order insensitive).
bool spec_equal(const VisSpec& a, const VisSpec& b);

} // namespace specfission
