#pragma once

#include <map>
#include <string>
#include <vector>

#include "specfission/cache.hpp"
#include "specfission/task_graph.hpp"

namespace specfission {

/// Resolves and ingests url datasets. Bare paths resolve under data_root;
/// file:// paths are absolute; http(s) urls are fetched.
class Loader {
  public:
    Loader() = default;
    explicit Loader(std::string data_root) : data_root_(std::move(data_root)) {}

    /// Errors: NotFound, FetchError, IngestError.
    Table load(const std::string& url, const std::string& format) const;

    const std::string& data_root() const { return data_root_; }

  private:
    std::string data_root_;
};

struct QueryStats {
    std::vector<Fingerprint> computed; // transform nodes evaluated this query
    std::vector<Fingerprint> hits;     // transform nodes served from cache
    double elapsed_ms = 0;
    int64_t bytes = 0; // serialized size of the returned values

    std::vector<std::string> computed_hex() const;
    std::vector<std::string> hits_hex() const;
};

struct QueryResult {
    std::map<int, TaskValuePtr> values; // exactly the requested ids
    QueryStats stats;
};

struct RuntimeConfig {
    size_t cache_bytes = 256ull << 20;
    std::string data_root;
    bool url_cache = true; // fingerprints cover the url string, not contents
};

/// Stateless query evaluator around one shared cache. Evaluates, in
/// dependency order, only nodes that are requested or feed a requested node
/// and are absent from the cache; newly computed values are cached. Errors
/// abort the whole query (no partial results).
class Runtime {
  public:
    explicit Runtime(RuntimeConfig config)
        : config_(std::move(config)), cache_(config_.cache_bytes), loader_(config_.data_root) {}

    /// Errors: LoadError, TransformError (carrying the node id).
    QueryResult execute(const Query& query);

    ValueCache& cache() { return cache_; }
    const Loader& loader() const { return loader_; }
    const RuntimeConfig& config() const { return config_; }

  private:
    RuntimeConfig config_;
    ValueCache cache_;
    Loader loader_;
};

nlohmann::json result_to_json(const QueryResult& r);
QueryResult result_from_json(const nlohmann::json& j);

} // namespace specfission
