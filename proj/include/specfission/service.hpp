#pragma once

#include <memory>
#include <string>
#include <thread>

#include "specfission/runtime.hpp"

namespace specfission {

struct ServiceConfig {
    int port = 0; // 0 picks any free port
    std::string host = "127.0.0.1";
    std::string port_file;   // when set, the bound port is written here
    size_t cache_bytes = 256ull << 20;
    std::string data_root;
    int inject_latency_ms = 0; // fixed delay added to /query responses
    bool url_cache = true;
    std::string cache_file; // cache persisted here on shutdown, loaded on start
};

/// HTTP front end for the runtime. One shared cache serves every
/// connection and session.
///   POST /query          query document -> result or error document
///   GET  /stats          cache entries/bytes and hit/miss totals
///   POST /admin/persist  write the cache file now
///   POST /admin/shutdown persist and stop
class Service {
  public:
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Bind and serve on a background thread; returns the bound port.
    int start();
    void wait();
    void stop();

    int port() const { return port_; }
    Runtime& runtime() { return *runtime_; }

    /// The wire entry point, usable without a socket.
    std::string handle_request(const std::string& body);
    std::string stats_response() const;
    void persist() const;

  private:
    ServiceConfig config_;
    std::unique_ptr<Runtime> runtime_;
    std::unique_ptr<class ServiceImpl> impl_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace specfission
