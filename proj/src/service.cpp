#include "specfission/service.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "specfission/error.hpp"

namespace specfission {

using nlohmann::json;

class ServiceImpl {
  public:
    httplib::Server server;
};

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      runtime_(std::make_unique<Runtime>(RuntimeConfig{config_.cache_bytes, config_.data_root,
                                                       config_.url_cache})),
      impl_(std::make_unique<ServiceImpl>()) {
    if (!config_.cache_file.empty()) runtime_->cache().load(config_.cache_file);

    impl_->server.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
        if (config_.inject_latency_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.inject_latency_ms));
        res.set_content(handle_request(req.body), "application/json");
    });
    impl_->server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(stats_response(), "application/json");
    });
    impl_->server.Post("/admin/persist",
                       [this](const httplib::Request&, httplib::Response& res) {
                           persist();
                           res.set_content("{\"ok\":true}", "application/json");
                       });
    impl_->server.Post("/admin/shutdown",
                       [this](const httplib::Request&, httplib::Response& res) {
                           persist();
                           res.set_content("{\"ok\":true}", "application/json");
                           impl_->server.stop();
                       });
}

Service::~Service() { stop(); }

std::string Service::handle_request(const std::string& body) {
    json response;
    try {
        json request = json::parse(body, nullptr, false);
        if (request.is_discarded())
            throw Error(ErrorCode::MalformedRequest, "request is not well-formed JSON");
        Query query = query_from_json(request);
        response = result_to_json(runtime_->execute(query));
    } catch (const Error& e) {
        response = {{"type", "error"}, {"message", e.what()}};
        if (e.node() >= 0) response["node"] = e.node();
    } catch (const std::exception& e) {
        response = {{"type", "error"}, {"message", e.what()}};
    }
    return response.dump();
}

std::string Service::stats_response() const {
    auto s = runtime_->cache().stats();
    return json{{"entries", s.entries},
                {"bytes", s.bytes},
                {"capacity", s.capacity},
                {"hits", s.hits},
                {"misses", s.misses}}
        .dump();
}

void Service::persist() const {
    if (!config_.cache_file.empty()) runtime_->cache().save(config_.cache_file);
}

int Service::start() {
    if (config_.port > 0) {
        if (!impl_->server.bind_to_port(config_.host, config_.port))
            throw Error(ErrorCode::FetchError,
                        "cannot bind to port " + std::to_string(config_.port));
        port_ = config_.port;
    } else {
        port_ = impl_->server.bind_to_any_port(config_.host);
        if (port_ <= 0) throw Error(ErrorCode::FetchError, "cannot bind to any port");
    }
    if (!config_.port_file.empty()) {
        std::ofstream out(config_.port_file, std::ios::trunc);
        out << port_ << "\n";
    }
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void Service::wait() {
    if (thread_.joinable()) thread_.join();
}

void Service::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

} // namespace specfission
