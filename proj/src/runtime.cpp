#include "specfission/runtime.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "specfission/error.hpp"
#include "specfission/transforms.hpp"

namespace specfission {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Loading

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "no such file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::string fetch_http(const std::string& url) {
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end + 3);
    std::string host = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(host);
    client.set_follow_location(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    auto res = client.Get(path);
    if (!res)
        throw Error(ErrorCode::FetchError,
                    "fetch failed for " + url + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorCode::FetchError,
                    "fetch failed for " + url + ": HTTP " + std::to_string(res->status));
    return res->body;
}

} // namespace

Table Loader::load(const std::string& url, const std::string& format) const {
    std::string bytes;
    if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
        bytes = fetch_http(url);
    } else if (url.rfind("file://", 0) == 0) {
        bytes = read_file(url.substr(7));
    } else if (!url.empty() && url[0] == '/') {
        bytes = read_file(url);
    } else {
        std::string base = data_root_.empty() ? std::string(".") : data_root_;
        bytes = read_file(base + "/" + url);
    }
    try {
        if (format == "csv") return ingest_csv(bytes);
        if (format == "json") return ingest_json(bytes);
    } catch (const Error& e) {
        throw Error(ErrorCode::IngestError, "cannot ingest " + url + ": " + e.what());
    }
    throw Error(ErrorCode::IngestError, "unknown format '" + format + "' for " + url);
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct ExecContext {
    const Query& query;
    std::map<int, size_t> pos;
    std::vector<Fingerprint> fps;
    std::map<int, TaskValuePtr> memo;
    std::set<Fingerprint> computed;
    std::set<Fingerprint> hits;
};

} // namespace

QueryResult Runtime::execute(const Query& query) {
    auto start = std::chrono::steady_clock::now();
    ExecContext ctx{query};
    ctx.fps = fingerprint_graph(query.nodes);
    for (size_t i = 0; i < query.nodes.size(); ++i) ctx.pos[query.nodes[i].id] = i;

    // Demand-driven: cache hits stop the descent, so ancestors of cached
    // nodes are never touched.
    std::function<TaskValuePtr(int)> resolve = [&](int id) -> TaskValuePtr {
        auto m = ctx.memo.find(id);
        if (m != ctx.memo.end()) return m->second;
        size_t i = ctx.pos.at(id);
        const TaskNode& node = query.nodes[i];
        const Fingerprint& fp = ctx.fps[i];
        TaskValuePtr value;
        switch (node.kind) {
        case TaskNode::Kind::Url: {
            auto load = [&]() -> TaskValuePtr {
                try {
                    return std::make_shared<const TaskValue>(loader_.load(node.url, node.format));
                } catch (Error& e) {
                    if (e.code() == ErrorCode::NotFound || e.code() == ErrorCode::FetchError ||
                        e.code() == ErrorCode::IngestError)
                        throw Error(ErrorCode::LoadError, e.what()).with_node(id);
                    throw;
                }
            };
            // Root loads are cached under the url-root fingerprint but do
            // not show up in the per-query computed/hit stats.
            if (config_.url_cache) value = cache_.get_or_compute(fp, load).first;
            else value = load();
            break;
        }
        case TaskNode::Kind::Inline:
            value = std::make_shared<const TaskValue>(*node.table);
            break;
        case TaskNode::Kind::Signal:
            value = std::make_shared<const TaskValue>(node.value);
            break;
        case TaskNode::Kind::Transform: {
            auto compute = [&]() -> TaskValuePtr {
                try {
                    if (node.inputs.empty())
                        throw Error(ErrorCode::TransformError, "transform node has no inputs");
                    TaskValuePtr input0 = resolve(node.inputs[0]);
                    const Table* table = std::get_if<Table>(input0.get());
                    if (!table)
                        throw Error(ErrorCode::TransformError,
                                    "transform input 0 must be a table");
                    auto names = step_signal_refs(node.op, node.params);
                    if (names.size() != node.inputs.size() - 1)
                        throw Error(ErrorCode::TransformError,
                                    "expected " + std::to_string(names.size()) +
                                        " value inputs, got " +
                                        std::to_string(node.inputs.size() - 1));
                    std::map<std::string, Value> env;
                    size_t slot = 1;
                    for (const auto& name : names) {
                        TaskValuePtr v = resolve(node.inputs[slot++]);
                        const Value* val = std::get_if<Value>(v.get());
                        if (!val)
                            throw Error(ErrorCode::TransformError,
                                        "value input for '" + name + "' is a table");
                        env[name] = *val;
                    }
                    SignalEnv sig_env = [&env](const std::string& n) -> const Value* {
                        auto it = env.find(n);
                        return it == env.end() ? nullptr : &it->second;
                    };
                    TransformResult out = apply_transform(node.op, node.params, *table, sig_env);
                    if (auto* t = std::get_if<Table>(&out))
                        return std::make_shared<const TaskValue>(std::move(*t));
                    return std::make_shared<const TaskValue>(std::get<Value>(std::move(out)));
                } catch (Error& e) {
                    if (e.node() >= 0) throw; // already attributed to a node
                    if (e.code() == ErrorCode::TransformError || e.code() == ErrorCode::LoadError)
                        throw e.with_node(id);
                    throw Error(ErrorCode::TransformError, node.op + " failed: " + e.what())
                        .with_node(id);
                }
            };
            auto [v, outcome] = cache_.get_or_compute(fp, compute);
            value = v;
            if (outcome == ValueCache::Outcome::Computed) ctx.computed.insert(fp);
            else ctx.hits.insert(fp);
            break;
        }
        }
        ctx.memo[id] = value;
        return value;
    };

    QueryResult result;
    for (int id : query.requested) {
        TaskValuePtr v = resolve(id);
        result.values[id] = v;
        result.stats.bytes += static_cast<int64_t>(task_value_bytes(*v));
    }
    result.stats.computed.assign(ctx.computed.begin(), ctx.computed.end());
    result.stats.hits.assign(ctx.hits.begin(), ctx.hits.end());
    result.stats.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return result;
}

// ---------------------------------------------------------------------------
// Wire form

std::vector<std::string> QueryStats::computed_hex() const {
    std::vector<std::string> out;
    for (const auto& fp : computed) out.push_back(fp.hex());
    return out;
}

std::vector<std::string> QueryStats::hits_hex() const {
    std::vector<std::string> out;
    for (const auto& fp : hits) out.push_back(fp.hex());
    return out;
}

json result_to_json(const QueryResult& r) {
    json values = json::object();
    for (const auto& [id, v] : r.values) values[std::to_string(id)] = task_value_to_json(*v);
    return {{"type", "result"},
            {"values", std::move(values)},
            {"stats",
             {{"computed", r.stats.computed_hex()},
              {"hits", r.stats.hits_hex()},
              {"elapsed_ms", r.stats.elapsed_ms},
              {"bytes", r.stats.bytes}}}};
}

QueryResult result_from_json(const json& j) {
    if (!j.is_object() || j.value("type", "") != "result")
        throw Error(ErrorCode::UnexpectedResponse, "not a result message");
    QueryResult r;
    for (auto it = j.at("values").begin(); it != j.at("values").end(); ++it)
        r.values[std::stoi(it.key())] =
            std::make_shared<const TaskValue>(task_value_from_json(it.value()));
    const json& stats = j.at("stats");
    for (const auto& h : stats.at("computed"))
        r.stats.computed.push_back(Fingerprint::from_hex(h.get<std::string>()));
    for (const auto& h : stats.at("hits"))
        r.stats.hits.push_back(Fingerprint::from_hex(h.get<std::string>()));
    r.stats.elapsed_ms = stats.value("elapsed_ms", 0.0);
    r.stats.bytes = stats.value("bytes", 0);
    return r;
}

} // namespace specfission
