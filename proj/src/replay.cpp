#include "specfission/replay.hpp"

#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "specfission/error.hpp"

namespace specfission {

using nlohmann::json;

std::vector<TraceEvent> parse_trace(const std::string& bytes) {
    json doc = json::parse(bytes, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw Error(ErrorCode::MalformedDocument, "trace must be a JSON array");
    std::vector<TraceEvent> trace;
    double last = 0;
    for (const auto& e : doc) {
        TraceEvent ev;
        ev.t_ms = e.at("t_ms").get<double>();
        ev.signal = e.at("signal").get<std::string>();
        ev.value = value_from_json(e.at("value"));
        if (ev.t_ms < last)
            throw Error(ErrorCode::MalformedDocument, "trace timestamps must not decrease");
        last = ev.t_ms;
        trace.push_back(std::move(ev));
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Endpoints

class HttpEndpointImpl {
  public:
    explicit HttpEndpointImpl(const std::string& address) : client("http://" + address) {
        client.set_connection_timeout(10);
        client.set_read_timeout(120);
    }
    httplib::Client client;
};

HttpEndpoint::HttpEndpoint(const std::string& address)
    : impl_(std::make_unique<HttpEndpointImpl>(address)) {}

HttpEndpoint::~HttpEndpoint() = default;

QueryResult HttpEndpoint::run(const Query& query) {
    auto res = impl_->client.Post("/query", query_to_json(query).dump(), "application/json");
    if (!res)
        throw Error(ErrorCode::FetchError,
                    "service unreachable: " + httplib::to_string(res.error()));
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded())
        throw Error(ErrorCode::UnexpectedResponse, "service returned invalid JSON");
    if (body.value("type", "") == "error")
        throw Error(ErrorCode::TransformError,
                    "service error: " + body.value("message", std::string("?")))
            .with_node(body.value("node", -1));
    return result_from_json(body);
}

// ---------------------------------------------------------------------------
// Replay

namespace {

ReplayRecord run_query(Session& session, Endpoint& endpoint, const Query& query) {
    ReplayRecord rec;
    auto start = std::chrono::steady_clock::now();
    QueryResult result = endpoint.run(query);
    rec.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    auto updates = session.apply_response(result);
    for (const auto& [name, table] : updates) rec.requested.push_back(name);
    rec.bytes = result.stats.bytes;
    rec.computed = result.stats.computed_hex();
    rec.hits = result.stats.hits_hex();
    return rec;
}

} // namespace

ReplayReport replay(const VisSpec& spec, const std::vector<TraceEvent>& trace,
                    Endpoint& endpoint, bool realtime) {
    PlanResult plan_result = plan(spec);
    auto [session, initial_query] = Session::open(std::move(plan_result));

    ReplayReport report;
    report.initial = run_query(session, endpoint, initial_query);
    report.initial.event = -1;

    double last_t = 0;
    for (size_t i = 0; i < trace.size(); ++i) {
        const TraceEvent& ev = trace[i];
        if (realtime && ev.t_ms > last_t)
            std::this_thread::sleep_for(
                std::chrono::duration<double, std::milli>(ev.t_ms - last_t));
        last_t = ev.t_ms;

        ReplayRecord rec;
        rec.event = static_cast<int>(i);
        rec.signal = ev.signal;
        auto query = session.set_signal(ev.signal, ev.value);
        if (query) rec = run_query(session, endpoint, *query);
        rec.event = static_cast<int>(i);
        rec.signal = ev.signal;
        report.events.push_back(std::move(rec));
    }
    return report;
}

namespace {

json record_to_json(const ReplayRecord& r) {
    return {{"event", r.event},     {"signal", r.signal},     {"requested", r.requested},
            {"bytes", r.bytes},     {"computed", r.computed}, {"hits", r.hits},
            {"latency_ms", r.latency_ms}};
}

} // namespace

json replay_report_to_json(const ReplayReport& report) {
    json events = json::array();
    for (const auto& r : report.events) events.push_back(record_to_json(r));
    return {{"initial", record_to_json(report.initial)}, {"events", std::move(events)}};
}

// ---------------------------------------------------------------------------
// Parity check

namespace {

/// Planned-side view: delivered exports stitched into their datasets, then
/// client-side steps applied as far as the engine can take them.
ChainEvalOutcome planned_view(const Session& session, const VisSpec& spec,
                              const Loader& loader) {
    ChainEvalOptions options;
    options.strict = false;
    for (const auto& sd : session.plan().server_spec.datasets) {
        auto it = session.client_datasets().find(sd.export_name);
        if (it != session.client_datasets().end())
            options.stitched[sd.dataset] = {it->second, sd.prefix};
    }
    return evaluate_chains(spec, session.signal_values(), loader, options);
}

void compare_views(const VisSpec& spec, const ChainEvalOutcome& planned,
                   const ChainEvalOutcome& oracle, const std::string& when,
                   std::vector<std::string>& diffs) {
    for (const auto& d : spec.datasets) {
        int rp = planned.reached.count(d.name) ? planned.reached.at(d.name) : -1;
        int ro = oracle.reached.count(d.name) ? oracle.reached.at(d.name) : -1;
        if (rp != ro) {
            diffs.push_back(when + ": dataset '" + d.name + "' evaluated to depth " +
                            std::to_string(rp) + " planned vs " + std::to_string(ro) +
                            " oracle");
            continue;
        }
        if (rp < 0) continue; // unavailable on both sides
        Table a = canonicalize_rows(planned.tables.at(d.name));
        Table b = canonicalize_rows(oracle.tables.at(d.name));
        std::string why;
        if (!tables_almost_equal(a, b, 1e-9, &why))
            diffs.push_back(when + ": dataset '" + d.name + "' differs: " + why);
    }
}

} // namespace

CheckResult check(const VisSpec& spec, const std::vector<TraceEvent>& trace,
                  const std::string& data_root) {
    CheckResult result;
    Loader loader(data_root);

    PlanResult plan_result = plan(spec);
    PlanReport report = validate_plan(spec, plan_result);
    for (const auto& v : report.violations) result.diffs.push_back("plan invariant: " + v);

    EmbeddedEndpoint endpoint(RuntimeConfig{64ull << 20, data_root, true});
    auto [session, initial_query] = Session::open(std::move(plan_result));
    session.apply_response(endpoint.run(initial_query));

    std::map<std::string, Value> oracle_env = session.signal_values();
    {
        ChainEvalOptions plain;
        plain.strict = false;
        compare_views(spec, planned_view(session, spec, loader),
                      evaluate_chains(spec, oracle_env, loader, plain), "initial",
                      result.diffs);
    }

    for (size_t i = 0; i < trace.size(); ++i) {
        const TraceEvent& ev = trace[i];
        auto query = session.set_signal(ev.signal, ev.value);
        oracle_env[ev.signal] = ev.value;
        if (query) session.apply_response(endpoint.run(*query));
        ChainEvalOptions plain;
        plain.strict = false;
        compare_views(spec, planned_view(session, spec, loader),
                      evaluate_chains(spec, oracle_env, loader, plain),
                      "event " + std::to_string(i), result.diffs);
    }
    return result;
}

} // namespace specfission
