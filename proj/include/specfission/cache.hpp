#pragma once

#include <condition_variable>
#include <functional>
#include <future>
#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <variant>

#include "specfission/fingerprint.hpp"
#include "specfission/table.hpp"

namespace specfission {

using TaskValue = std::variant<Table, Value>;
using TaskValuePtr = std::shared_ptr<const TaskValue>;

/// Serialized byte length; the unit of cache accounting.
size_t task_value_bytes(const TaskValue& v);
nlohmann::json task_value_to_json(const TaskValue& v); // table doc or {"value": ...}
TaskValue task_value_from_json(const nlohmann::json& j);

/// Byte-bounded LRU cache keyed by fingerprint, safe for concurrent use.
/// Concurrent demands for one fingerprint coalesce onto a single
/// computation (single-flight); the others wait for its result. Entries
/// larger than the whole capacity are returned but never stored.
class ValueCache {
  public:
    explicit ValueCache(size_t capacity_bytes) : capacity_(capacity_bytes) {}

    enum class Outcome { Hit, Computed, Waited };

    std::pair<TaskValuePtr, Outcome> get_or_compute(const Fingerprint& fp,
                                                    const std::function<TaskValuePtr()>& compute);

    std::optional<TaskValuePtr> lookup(const Fingerprint& fp);

    struct Stats {
        size_t entries = 0;
        size_t bytes = 0;
        size_t capacity = 0;
        uint64_t hits = 0;
        uint64_t misses = 0;
    };
    Stats stats() const;

    void clear();

    /// Persistence for warm restarts: a JSON file of entries in recency
    /// order. load() returns the number of entries restored.
    void save(const std::string& path) const;
    size_t load(const std::string& path);

  private:
    void insert_locked(const Fingerprint& fp, TaskValuePtr value, size_t size,
                       std::unique_lock<std::mutex>& lock);

    struct Entry {
        TaskValuePtr value;
        size_t size = 0;
        std::list<Fingerprint>::iterator lru_it;
    };

    mutable std::mutex mu_;
    size_t capacity_;
    size_t bytes_ = 0;
    uint64_t hits_ = 0;
    uint64_t misses_ = 0;
    std::unordered_map<Fingerprint, Entry, FingerprintHash> entries_;
    std::list<Fingerprint> lru_; // front = most recently used
    std::unordered_map<Fingerprint, std::shared_future<TaskValuePtr>, FingerprintHash> inflight_;
};

} // namespace specfission
