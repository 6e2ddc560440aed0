#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/oracle.hpp"
#include "specfission/planner.hpp"
#include "specfission/replay.hpp"
#include "specfission/service.hpp"

namespace sf = specfission;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sf::Error(sf::ErrorCode::NotFound, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw sf::Error(sf::ErrorCode::NotFound, "cannot write " + path);
    out << content;
}

sf::Service* g_service = nullptr;

int cmd_plan(const std::string& spec_path, const std::string& out_dir) {
    sf::VisSpec spec = sf::parse_spec(read_file(spec_path));
    sf::PlanResult result = sf::plan(spec);
    sf::PlanReport report = sf::validate_plan(spec, result);

    write_file(out_dir + "/client_spec.json", sf::emit_spec(result.client_spec));
    write_file(out_dir + "/server_spec.json",
               sf::server_spec_to_json(result.server_spec).dump(2));
    write_file(out_dir + "/comm_plan.json", sf::comm_plan_to_json(result.comm_plan).dump(2));

    for (const auto& s : report.splits) {
        std::cout << s.dataset << ": " << s.server_steps << "/" << s.total_steps
                  << " steps on the server";
        if (!s.export_name.empty()) std::cout << " -> " << s.export_name;
        std::cout << "\n";
    }
    for (const auto& v : report.violations) std::cerr << "violation: " << v << "\n";
    return report.ok() ? 0 : 1;
}

int cmd_serve(sf::ServiceConfig config) {
    static sf::Service service(std::move(config));
    g_service = &service;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    int port = service.start();
    std::cout << "listening on 127.0.0.1:" << port << std::endl;
    service.wait();
    service.persist();
    return 0;
}

int cmd_eval(const std::string& spec_path, const std::vector<std::string>& signal_args,
             const std::string& data_root) {
    sf::VisSpec spec = sf::parse_spec(read_file(spec_path));
    std::map<std::string, sf::Value> signals;
    for (const auto& arg : signal_args) {
        auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw sf::Error(sf::ErrorCode::MalformedDocument,
                            "--signal expects name=json, got " + arg);
        json v = json::parse(arg.substr(eq + 1), nullptr, false);
        if (v.is_discarded())
            throw sf::Error(sf::ErrorCode::MalformedDocument,
                            "bad JSON in --signal " + arg);
        signals[arg.substr(0, eq)] = sf::value_from_json(v);
    }
    auto tables = sf::oracle_evaluate(spec, signals, sf::Loader(data_root));
    json out = json::object();
    for (const auto& [name, table] : tables) out[name] = sf::table_to_rows_json(table);
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_replay(const std::string& spec_path, const std::string& trace_path,
               const std::string& server, bool embedded, const std::string& report_path,
               const std::string& data_root, bool realtime, size_t cache_bytes) {
    sf::VisSpec spec = sf::parse_spec(read_file(spec_path));
    auto trace = sf::parse_trace(read_file(trace_path));

    std::unique_ptr<sf::Endpoint> endpoint;
    if (embedded) {
        endpoint = std::make_unique<sf::EmbeddedEndpoint>(
            sf::RuntimeConfig{cache_bytes, data_root, true});
    } else {
        endpoint = std::make_unique<sf::HttpEndpoint>(server);
    }
    sf::ReplayReport report = sf::replay(spec, trace, *endpoint, realtime);
    json doc = sf::replay_report_to_json(report);
    if (report_path.empty()) std::cout << doc.dump(2) << std::endl;
    else write_file(report_path, doc.dump(2));
    return 0;
}

int cmd_check(const std::string& spec_path, const std::string& trace_path,
              const std::string& data_root) {
    sf::VisSpec spec = sf::parse_spec(read_file(spec_path));
    std::vector<sf::TraceEvent> trace;
    if (!trace_path.empty()) trace = sf::parse_trace(read_file(trace_path));
    sf::CheckResult result = sf::check(spec, trace, data_root);
    if (result.ok()) {
        std::cout << "check passed: " << spec.datasets.size() << " datasets, "
                  << trace.size() << " events" << std::endl;
        return 0;
    }
    for (const auto& d : result.diffs) std::cout << "diff: " << d << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"specfission: spec partitioning, fingerprint-cached evaluation, replay"};
    app.require_subcommand(1);

    auto* plan_cmd = app.add_subcommand("plan", "partition a spec and write the three plan files");
    std::string plan_spec, plan_out = ".";
    plan_cmd->add_option("spec", plan_spec, "input spec")->required();
    plan_cmd->add_option("--out", plan_out, "output directory");

    auto* serve_cmd = app.add_subcommand("serve", "run the query service");
    sf::ServiceConfig config;
    serve_cmd->add_option("--port", config.port, "port (0 picks one)");
    serve_cmd->add_option("--port-file", config.port_file, "write the bound port here");
    serve_cmd->add_option("--cache-bytes", config.cache_bytes, "cache capacity in bytes");
    serve_cmd->add_option("--data-root", config.data_root, "base directory for bare data paths");
    serve_cmd->add_option("--inject-latency-ms", config.inject_latency_ms,
                          "add a fixed delay to every query response");
    bool no_url_cache = false;
    serve_cmd->add_flag("--no-url-cache", no_url_cache, "reload url data on every use");
    serve_cmd->add_option("--cache-file", config.cache_file,
                          "persist the cache here on shutdown and load it on start");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate every dataset directly and print it");
    std::string eval_spec, eval_root;
    std::vector<std::string> eval_signals;
    eval_cmd->add_option("spec", eval_spec, "input spec")->required();
    eval_cmd->add_option("--signal", eval_signals, "signal value as name=json (repeatable)");
    eval_cmd->add_option("--data-root", eval_root, "base directory for bare data paths");

    auto* replay_cmd = app.add_subcommand("replay", "replay an interaction trace");
    std::string rp_spec, rp_trace, rp_server, rp_report, rp_root;
    bool rp_embedded = false, rp_realtime = false;
    size_t rp_cache = 256ull << 20;
    replay_cmd->add_option("spec", rp_spec, "input spec")->required();
    replay_cmd->add_option("trace", rp_trace, "trace file")->required();
    replay_cmd->add_option("--server", rp_server, "service address host:port");
    replay_cmd->add_flag("--embedded", rp_embedded, "run the runtime in-process");
    replay_cmd->add_option("--report", rp_report, "write the report here (default stdout)");
    replay_cmd->add_option("--data-root", rp_root, "base directory for bare data paths");
    replay_cmd->add_flag("--realtime", rp_realtime, "honor trace timestamps");
    replay_cmd->add_option("--cache-bytes", rp_cache, "embedded cache capacity");

    auto* check_cmd = app.add_subcommand("check", "compare the planned pipeline to the oracle");
    std::string ck_spec, ck_trace, ck_root;
    check_cmd->add_option("spec", ck_spec, "input spec")->required();
    check_cmd->add_option("trace", ck_trace, "trace file (optional)");
    check_cmd->add_option("--data-root", ck_root, "base directory for bare data paths");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*plan_cmd) return cmd_plan(plan_spec, plan_out);
        if (*serve_cmd) {
            config.url_cache = !no_url_cache;
            return cmd_serve(std::move(config));
        }
        if (*eval_cmd) return cmd_eval(eval_spec, eval_signals, eval_root);
        if (*replay_cmd) {
            if (rp_embedded == rp_server.empty() && !rp_embedded) {
                std::cerr << "replay needs --embedded or --server host:port\n";
                return 2;
            }
            return cmd_replay(rp_spec, rp_trace, rp_server, rp_embedded, rp_report, rp_root,
                              rp_realtime, rp_cache);
        }
        if (*check_cmd) return cmd_check(ck_spec, ck_trace, ck_root);
    } catch (const sf::Error& e) {
        std::cerr << sf::error_code_name(e.code()) << ": " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
