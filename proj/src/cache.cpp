#include "specfission/cache.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"

namespace specfission {

size_t task_value_bytes(const TaskValue& v) {
    if (const auto* t = std::get_if<Table>(&v)) return serialize_table(*t).size();
    return value_to_string(std::get<Value>(v)).size();
}

nlohmann::json task_value_to_json(const TaskValue& v) {
    if (const auto* t = std::get_if<Table>(&v)) return table_to_json(*t);
    return nlohmann::json{{"value", value_to_json(std::get<Value>(v))}};
}

TaskValue task_value_from_json(const nlohmann::json& j) {
    if (j.is_object() && j.contains("schema")) return table_from_json(j);
    if (j.is_object() && j.contains("value")) return value_from_json(j.at("value"));
    throw Error(ErrorCode::MalformedDocument, "neither a table nor a value document");
}

std::optional<TaskValuePtr> ValueCache::lookup(const Fingerprint& fp) {
    std::unique_lock lock(mu_);
    auto it = entries_.find(fp);
    if (it == entries_.end()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    lru_.erase(it->second.lru_it);
    lru_.push_front(fp);
    it->second.lru_it = lru_.begin();
    return it->second.value;
}

std::pair<TaskValuePtr, ValueCache::Outcome>
ValueCache::get_or_compute(const Fingerprint& fp, const std::function<TaskValuePtr()>& compute) {
    std::shared_future<TaskValuePtr> wait_on;
    {
        std::unique_lock lock(mu_);
        auto it = entries_.find(fp);
        if (it != entries_.end()) {
            ++hits_;
            lru_.erase(it->second.lru_it);
            lru_.push_front(fp);
            it->second.lru_it = lru_.begin();
            return {it->second.value, Outcome::Hit};
        }
        auto in = inflight_.find(fp);
        if (in != inflight_.end()) {
            wait_on = in->second;
        } else {
            ++misses_;
            std::promise<TaskValuePtr> promise;
            inflight_[fp] = promise.get_future().share();
            lock.unlock();
            TaskValuePtr value;
            try {
                value = compute();
                size_t size = task_value_bytes(*value);
                lock.lock();
                insert_locked(fp, value, size, lock);
                inflight_.erase(fp);
                lock.unlock();
                promise.set_value(value);
            } catch (...) {
                if (!lock.owns_lock()) lock.lock();
                inflight_.erase(fp);
                lock.unlock();
                promise.set_exception(std::current_exception());
                throw;
            }
            return {value, Outcome::Computed};
        }
    }
    return {wait_on.get(), Outcome::Waited}; // rethrows the computer's error
}

void ValueCache::insert_locked(const Fingerprint& fp, TaskValuePtr value, size_t size,
                               std::unique_lock<std::mutex>&) {
    if (size > capacity_) return; // would never fit
    auto it = entries_.find(fp);
    if (it != entries_.end()) return;
    while (bytes_ + size > capacity_ && !lru_.empty()) {
        Fingerprint victim = lru_.back();
        lru_.pop_back();
        auto v = entries_.find(victim);
        bytes_ -= v->second.size;
        entries_.erase(v);
    }
    lru_.push_front(fp);
    entries_[fp] = Entry{std::move(value), size, lru_.begin()};
    bytes_ += size;
}

ValueCache::Stats ValueCache::stats() const {
    std::unique_lock lock(mu_);
    return Stats{entries_.size(), bytes_, capacity_, hits_, misses_};
}

void ValueCache::clear() {
    std::unique_lock lock(mu_);
    entries_.clear();
    lru_.clear();
    bytes_ = 0;
}

void ValueCache::save(const std::string& path) const {
    nlohmann::json entries = nlohmann::json::array();
    {
        std::unique_lock lock(mu_);
        // Least recent first so loading restores recency order.
        for (auto it = lru_.rbegin(); it != lru_.rend(); ++it) {
            const Entry& e = entries_.at(*it);
            entries.push_back({{"fp", it->hex()}, {"data", task_value_to_json(*e.value)}});
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::NotFound, "cannot write cache file " + path);
    out << nlohmann::json{{"entries", std::move(entries)}}.dump();
}

size_t ValueCache::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("entries")) return 0;
    size_t n = 0;
    for (const auto& e : doc.at("entries")) {
        Fingerprint fp = Fingerprint::from_hex(e.at("fp").get<std::string>());
        auto value = std::make_shared<const TaskValue>(task_value_from_json(e.at("data")));
        size_t size = task_value_bytes(*value);
        std::unique_lock lock(mu_);
        insert_locked(fp, std::move(value), size, lock);
        ++n;
    }
    return n;
}

} // namespace specfission
