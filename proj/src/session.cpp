#include "specfission/session.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"

namespace specfission {

std::pair<Session, Query> Session::open(PlanResult plan) {
    Session s;
    s.plan_ = std::move(plan);
    for (const auto& sig : s.plan_.client_spec.signals)
        s.signal_values_[sig.name] = sig.initial ? *sig.initial : Value();

    if (s.plan_.server_spec.empty()) return {std::move(s), Query{}};

    LoweredGraph lowered = lower(s.plan_.server_spec, s.signal_values_);
    Query q = s.issue(s.plan_.comm_plan.server_to_client, lowered);
    return {std::move(s), std::move(q)};
}

Query Session::issue(const std::vector<std::string>& exports, const LoweredGraph& lowered) {
    std::map<std::string, int> export_ids;
    Query q = lowered.make_query(exports, &export_ids);
    Issued issued;
    for (const auto& name : exports)
        issued.exports[name] = {export_ids.at(name), lowered.export_fp(name)};
    issued.ids = q.requested;
    std::sort(issued.ids.begin(), issued.ids.end());
    if (outstanding_) {
        history_.push_back(std::move(*outstanding_));
        if (history_.size() > 32) history_.pop_front();
    }
    outstanding_ = std::move(issued);
    return q;
}

std::optional<Query> Session::set_signal(const std::string& name, const Value& value) {
    if (!plan_.client_spec.find_signal(name))
        throw Error(ErrorCode::UnknownSignal, "unknown signal '" + name + "'");
    signal_values_[name] = value;

    const auto& c2s = plan_.comm_plan.client_to_server;
    if (std::find(c2s.begin(), c2s.end(), name) == c2s.end()) return std::nullopt;

    LoweredGraph lowered = lower(plan_.server_spec, signal_values_);
    std::vector<std::string> changed;
    for (const auto& exp : plan_.comm_plan.server_to_client) {
        auto it = last_fp_.find(exp);
        if (it == last_fp_.end() || it->second != lowered.export_fp(exp))
            changed.push_back(exp);
    }
    if (changed.empty()) {
        // Everything applied is already current; any in-flight query is now
        // irrelevant.
        if (outstanding_) {
            history_.push_back(std::move(*outstanding_));
            if (history_.size() > 32) history_.pop_front();
            outstanding_.reset();
        }
        return std::nullopt;
    }
    return issue(changed, lowered);
}

std::vector<std::pair<std::string, Table>> Session::apply_response(const QueryResult& result) {
    std::vector<int> ids;
    for (const auto& [id, v] : result.values) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    auto matches = [&](const Issued& issued) { return issued.ids == ids; };

    if (!outstanding_ || !matches(*outstanding_)) {
        // Not the answer to the current query: stale if it plausibly answers
        // a superseded one, an error otherwise.
        for (const auto& old : history_)
            if (matches(old)) return {};
        if (!outstanding_ && ids.empty()) return {};
        throw Error(ErrorCode::UnexpectedResponse,
                    "response does not match any issued query");
    }

    std::vector<std::pair<std::string, Table>> updates;
    for (const auto& exp : plan_.comm_plan.server_to_client) {
        auto it = outstanding_->exports.find(exp);
        if (it == outstanding_->exports.end()) continue;
        const auto& [node_id, fp] = it->second;
        auto vit = result.values.find(node_id);
        if (vit == result.values.end())
            throw Error(ErrorCode::UnexpectedResponse,
                        "response is missing export " + exp);
        const Table* table = std::get_if<Table>(vit->second.get());
        if (!table)
            throw Error(ErrorCode::UnexpectedResponse,
                        "export " + exp + " is not a table");
        client_datasets_[exp] = *table;
        last_fp_[exp] = fp;
        updates.emplace_back(exp, *table);
    }
    outstanding_.reset();
    return updates;
}

} // namespace specfission
