#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "specfission/runtime.hpp"
#include "specfission/spec_model.hpp"

namespace specfission {

/// Step-level chain evaluation shared by the oracle and the parity check.
/// Datasets listed in `stitched` start from the given table at the given
/// step depth instead of being evaluated from their source.
struct ChainEvalOptions {
    /// Throw UnsupportedForOracle at the first step the engine cannot run
    /// (when false, evaluation just stops before it).
    bool strict = true;
    std::map<std::string, std::pair<Table, int>> stitched;
};

struct ChainEvalOutcome {
    std::map<std::string, Table> tables; // dataset -> table at reached depth
    std::map<std::string, int> reached;  // dataset -> step depth, -1 unavailable
};

ChainEvalOutcome evaluate_chains(const VisSpec& spec,
                                 const std::map<std::string, Value>& signal_values,
                                 const Loader& loader, const ChainEvalOptions& options);

/// Direct, plan-free, cache-free evaluation of every dataset's full chain.
/// Errors: UnsupportedForOracle, UnboundSignal, TransformError.
std::map<std::string, Table> oracle_evaluate(const VisSpec& spec,
                                             const std::map<std::string, Value>& signal_values,
                                             const Loader& loader);

} // namespace specfission
