#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "specfission/fingerprint.hpp"
#include "specfission/planner.hpp"
#include "specfission/table.hpp"

namespace specfission {

/// One node of a query graph. Roots carry their definition inline (url,
/// table, or signal value); transform nodes reference earlier nodes.
/// inputs[0] of a transform is its table input, the rest are value inputs
/// bound, in sorted name order, to the signal names its parameters
/// reference.
struct TaskNode {
    enum class Kind { Url, Inline, Signal, Transform };

    int id = 0;
    Kind kind = Kind::Url;
    // url root
    std::string url;
    std::string format;
    // inline root
    std::shared_ptr<const Table> table;
    // signal root
    std::string name;
    Value value;
    // transform
    std::string op;
    nlohmann::json params;
    std::vector<int> inputs;
};

struct Query {
    std::vector<TaskNode> nodes; // inputs always reference earlier entries
    std::vector<int> requested;
};

/// Digest of one node given its inputs' digests. Canonical encodings:
///   url root:    'U' len(url) url len(format) format
///   inline root: 'I' digest of the serialized table (16 bytes)
///   signal root: 'S' value encoding (the name does not contribute)
///   transform:   'T' len(op) op len(params) params, sorted-key JSON with
///                canonical expression text, then each input digest
/// All lengths are little-endian u32.
Fingerprint fingerprint_node(const TaskNode& node, const std::vector<Fingerprint>& input_fps);

/// Digests for a whole graph, indexed like `nodes`.
std::vector<Fingerprint> fingerprint_graph(const std::vector<TaskNode>& nodes);

/// A lowered server spec: the full task graph plus the export table of
/// interest per server dataset. Lowering deduplicates shared subchains by
/// fingerprint, canonicalizes expression parameters, and turns extent steps
/// into value nodes consumed by later steps.
struct LoweredGraph {
    std::vector<TaskNode> nodes;
    std::vector<Fingerprint> fps;
    std::map<std::string, int> exports; // export name -> node id

    Fingerprint export_fp(const std::string& name) const { return fps[exports.at(name)]; }

    /// Query containing only the requested exports and their ancestors,
    /// with ids renumbered compactly. Returns the node id each export maps
    /// to in the new query.
    Query make_query(const std::vector<std::string>& requested_exports,
                     std::map<std::string, int>* export_ids = nullptr) const;
};

/// Errors: UnboundSignal when a referenced client signal has no value.
LoweredGraph lower(const ServerSpec& spec, const std::map<std::string, Value>& signal_values);

nlohmann::json query_to_json(const Query& q);
/// Errors: MalformedRequest.
Query query_from_json(const nlohmann::json& j);

} // namespace specfission
