#pragma once

// Deterministic random inputs for the property tests.

#include <random>
#include <string>
#include <vector>

#include "specfission/expr.hpp"
#include "specfission/table.hpp"

namespace specfission::testgen {

class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    int64_t int_in(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
    }
    double real_in(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    bool chance(double p) { return std::uniform_real_distribution<>(0, 1)(engine_) < p; }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[size_t(int_in(0, int64_t(v.size()) - 1))];
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

/// Random table: 2-5 columns of mixed types with some nulls, up to max_rows.
Table random_table(Rng& rng, size_t max_rows = 200);

/// Random expression inside the supported subset over the given datum fields
/// and signal names. Mostly numeric so evaluation usually succeeds.
ExprPtr random_supported_expr(Rng& rng, const std::vector<std::string>& fields,
                              const std::vector<std::string>& signals, int depth = 3);

Value random_scalar(Rng& rng);

} // namespace specfission::testgen
