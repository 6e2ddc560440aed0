#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace specfission {

/// Broken-down UTC time. month is 1-12, day 1-31.
struct CivilTime {
    int year = 1970;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;
    int ms = 0;
};

/// Days since 1970-01-01 for a proleptic Gregorian date.
int64_t days_from_civil(int year, int month, int day);

/// Inverse of days_from_civil.
void civil_from_days(int64_t days, int& year, int& month, int& day);

CivilTime civil_from_ms(int64_t epoch_ms);
int64_t ms_from_civil(const CivilTime& c);

/// 0 = Sunday ... 6 = Saturday.
int weekday_from_days(int64_t days);

/// Accepts YYYY-MM-DD with optional [T ]HH:MM[:SS[.fff]] and optional
/// Z or +HH:MM / -HH:MM zone suffix. Returns epoch milliseconds UTC, or
/// nullopt when the text is not a timestamp.
std::optional<int64_t> parse_iso8601(std::string_view text);

/// YYYY-MM-DDTHH:MM:SS[.fff]Z (milliseconds only when nonzero).
std::string format_iso8601(int64_t epoch_ms);

} // namespace specfission
