#pragma once

#include <memory>
#include <string>
#include <vector>

#include "specfission/oracle.hpp"
#include "specfission/session.hpp"

namespace specfission {

struct TraceEvent {
    double t_ms = 0;
    std::string signal;
    Value value;
};

/// Array of {"t_ms":N,"signal":S,"value":V}; t_ms must be non-decreasing.
std::vector<TraceEvent> parse_trace(const std::string& bytes);

/// Where queries go: an in-process runtime or a remote service.
class Endpoint {
  public:
    virtual ~Endpoint() = default;
    virtual QueryResult run(const Query& query) = 0;
};

class EmbeddedEndpoint : public Endpoint {
  public:
    explicit EmbeddedEndpoint(RuntimeConfig config) : runtime_(std::move(config)) {}
    QueryResult run(const Query& query) override { return runtime_.execute(query); }
    Runtime& runtime() { return runtime_; }

  private:
    Runtime runtime_;
};

/// Talks to a running service over HTTP ("host:port").
class HttpEndpoint : public Endpoint {
  public:
    explicit HttpEndpoint(const std::string& address);
    ~HttpEndpoint() override;
    QueryResult run(const Query& query) override;

  private:
    std::unique_ptr<class HttpEndpointImpl> impl_;
};

struct ReplayRecord {
    int event = -1; // -1 marks the initial render
    std::string signal;
    std::vector<std::string> requested; // export names
    int64_t bytes = 0;
    std::vector<std::string> computed; // fingerprint hex
    std::vector<std::string> hits;
    double latency_ms = 0;
};

struct ReplayReport {
    ReplayRecord initial;
    std::vector<ReplayRecord> events;
};

nlohmann::json replay_report_to_json(const ReplayReport& report);

/// Plans the spec, opens a session against the endpoint, feeds the trace
/// and records what each event requested, transferred and computed.
ReplayReport replay(const VisSpec& spec, const std::vector<TraceEvent>& trace,
                    Endpoint& endpoint, bool realtime = false);

struct CheckResult {
    std::vector<std::string> diffs;
    bool ok() const { return diffs.empty(); }
};

/// After the initial render and after every trace prefix, compares each
/// dataset under plan+runtime+session against direct oracle evaluation at
/// the same depth: exact for non-floats, 1e-9 relative for floats, canonical
/// row order on both sides.
CheckResult check(const VisSpec& spec, const std::vector<TraceEvent>& trace,
                  const std::string& data_root);

} // namespace specfission
