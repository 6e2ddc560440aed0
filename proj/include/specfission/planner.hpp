#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "specfission/spec_model.hpp"

namespace specfission {

/// One server-resident chain. Named sources are resolved at planning time,
/// so every entry is self-contained: a url or inline root plus the full
/// transform list leading to the exported table. Shared prefixes across
/// entries collapse again when the chain is lowered to a task graph.
struct ServerDataset {
    std::string export_name; // __sf_<dataset>_<prefix>
    std::string dataset;     // original dataset name
    int prefix = 0;          // how many of the dataset's own steps moved
    DatasetSource source;
    std::vector<TransformSpec> transforms;
};

struct ServerSpec {
    std::vector<ServerDataset> datasets;
    /// Client signals consumed as roots, with their initial values.
    std::vector<std::pair<std::string, Value>> referenced_signals;

    bool empty() const { return datasets.empty(); }
};

struct CommunicationPlan {
    std::vector<std::string> client_to_server; // signal names
    std::vector<std::string> server_to_client; // export names
};

struct PlanResult {
    VisSpec client_spec;
    ServerSpec server_spec;
    CommunicationPlan comm_plan;
};

/// Reserved dataset key that carries the export name on client placeholders.
inline constexpr const char* kExportField = "__sf_export";

/// Static supportability of one step: recognized op, valid parameters, all
/// expressions parsed and inside the subset.
bool step_supported(const TransformSpec& step);

/// Greedy partition: for every dataset, the longest supported transform
/// prefix over a supported source moves to the server; the client dataset
/// becomes a placeholder holding the rest. Signals always stay client-side.
/// Errors: CyclicDependency.
PlanResult plan(const VisSpec& spec);

struct PlanReport {
    struct Split {
        std::string dataset;
        int server_steps = 0;
        int total_steps = 0;
        std::string export_name; // empty when the dataset stayed client-side
    };
    std::vector<Split> splits;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Re-checks all PlanResult invariants against the original spec.
PlanReport validate_plan(const VisSpec& spec, const PlanResult& result);

nlohmann::json server_spec_to_json(const ServerSpec& s);
ServerSpec server_spec_from_json(const nlohmann::json& j);
nlohmann::json comm_plan_to_json(const CommunicationPlan& p);
CommunicationPlan comm_plan_from_json(const nlohmann::json& j);

} // namespace specfission
