#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specfission/planner.hpp"
#include "specfission/runtime.hpp"
#include "specfission/task_graph.hpp"

namespace specfission {

/// The stateful middleware for one visualization: holds current signal
/// values and delivered tables, derives the minimal query on each signal
/// change, and applies responses. One query is in flight at a time; a newer
/// signal change supersedes interest in older pending exports, and stale
/// responses are dropped.
class Session {
  public:
    /// Initializes signal state from the plan and returns the initial query
    /// requesting every export (empty query for an empty plan).
    static std::pair<Session, Query> open(PlanResult plan);

    /// Updates a signal value. Returns a query exactly when the signal flows
    /// client-to-server and some export fingerprint changed; a no-op change
    /// returns nothing and cancels interest in any pending query.
    /// Errors: UnknownSignal.
    std::optional<Query> set_signal(const std::string& name, const Value& value);

    /// Applies a response to the outstanding query and returns the delivered
    /// (export, table) updates in plan order. Responses for superseded
    /// queries yield an empty list. Errors: UnexpectedResponse for results
    /// that match nothing this session ever requested.
    std::vector<std::pair<std::string, Table>> apply_response(const QueryResult& result);

    const PlanResult& plan() const { return plan_; }
    const std::map<std::string, Value>& signal_values() const { return signal_values_; }
    const std::map<std::string, Table>& client_datasets() const { return client_datasets_; }
    const std::map<std::string, Fingerprint>& last_fp() const { return last_fp_; }
    bool has_pending() const { return outstanding_.has_value(); }

  private:
    struct Issued {
        std::map<std::string, std::pair<int, Fingerprint>> exports; // name -> (node id, fp)
        std::vector<int> ids;                                       // sorted requested ids
    };

    Query issue(const std::vector<std::string>& exports, const LoweredGraph& lowered);

    PlanResult plan_;
    std::map<std::string, Value> signal_values_;
    std::map<std::string, Fingerprint> last_fp_;
    std::map<std::string, Table> client_datasets_;
    std::optional<Issued> outstanding_;
    std::deque<Issued> history_; // superseded queries, for stale detection
};

} // namespace specfission
