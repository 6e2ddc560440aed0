#include "specfission/time_util.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace specfission {

int64_t days_from_civil(int year, int month, int day) {
    // Howard Hinnant's algorithm, shifted so the era starts on March 1.
    int64_t y = year;
    y -= month <= 2;
    int64_t era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t days, int& year, int& month, int& day) {
    days += 719468;
    int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(days - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    int64_t y = static_cast<int64_t>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = static_cast<int>(y + (month <= 2));
}

namespace {

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

} // namespace

CivilTime civil_from_ms(int64_t epoch_ms) {
    CivilTime c;
    int64_t days = floor_div(epoch_ms, 86400000);
    int64_t rem = floor_mod(epoch_ms, 86400000);
    civil_from_days(days, c.year, c.month, c.day);
    c.hour = static_cast<int>(rem / 3600000);
    rem %= 3600000;
    c.minute = static_cast<int>(rem / 60000);
    rem %= 60000;
    c.second = static_cast<int>(rem / 1000);
    c.ms = static_cast<int>(rem % 1000);
    return c;
}

int64_t ms_from_civil(const CivilTime& c) {
    return days_from_civil(c.year, c.month, c.day) * 86400000 + c.hour * 3600000LL +
           c.minute * 60000LL + c.second * 1000LL + c.ms;
}

int weekday_from_days(int64_t days) {
    // 1970-01-01 was a Thursday.
    return static_cast<int>(floor_mod(days + 4, 7));
}

namespace {

bool parse_int(std::string_view s, size_t pos, size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (size_t i = pos; i < pos + len; ++i) {
        char ch = s[i];
        if (ch < '0' || ch > '9') return false;
        v = v * 10 + (ch - '0');
    }
    out = v;
    return true;
}

} // namespace

std::optional<int64_t> parse_iso8601(std::string_view s) {
    CivilTime c;
    if (!parse_int(s, 0, 4, c.year)) return std::nullopt;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!parse_int(s, 5, 2, c.month) || !parse_int(s, 8, 2, c.day)) return std::nullopt;
    if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31) return std::nullopt;
    size_t pos = 10;
    if (pos < s.size()) {
        if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
        ++pos;
        if (!parse_int(s, pos, 2, c.hour)) return std::nullopt;
        pos += 2;
        if (pos >= s.size() || s[pos] != ':') return std::nullopt;
        ++pos;
        if (!parse_int(s, pos, 2, c.minute)) return std::nullopt;
        pos += 2;
        if (pos < s.size() && s[pos] == ':') {
            ++pos;
            if (!parse_int(s, pos, 2, c.second)) return std::nullopt;
            pos += 2;
            if (pos < s.size() && s[pos] == '.') {
                ++pos;
                size_t start = pos;
                int frac = 0;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
                    if (pos - start < 3) frac = frac * 10 + (s[pos] - '0');
                    ++pos;
                }
                size_t ndigits = pos - start;
                if (ndigits == 0) return std::nullopt;
                for (size_t i = ndigits; i < 3; ++i) frac *= 10;
                c.ms = frac;
            }
        }
        if (c.hour > 23 || c.minute > 59 || c.second > 60) return std::nullopt;
    }
    int64_t offset_ms = 0;
    if (pos < s.size()) {
        char z = s[pos];
        if (z == 'Z') {
            ++pos;
        } else if (z == '+' || z == '-') {
            int oh = 0, om = 0;
            ++pos;
            if (!parse_int(s, pos, 2, oh)) return std::nullopt;
            pos += 2;
            if (pos < s.size() && s[pos] == ':') ++pos;
            if (!parse_int(s, pos, 2, om)) return std::nullopt;
            pos += 2;
            offset_ms = (oh * 3600000LL + om * 60000LL) * (z == '-' ? -1 : 1);
        } else {
            return std::nullopt;
        }
    }
    if (pos != s.size()) return std::nullopt;
    return ms_from_civil(c) - offset_ms;
}

std::string format_iso8601(int64_t epoch_ms) {
    CivilTime c = civil_from_ms(epoch_ms);
    char buf[40];
    if (c.ms != 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", c.year, c.month,
                      c.day, c.hour, c.minute, c.second, c.ms);
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                      c.hour, c.minute, c.second);
    }
    return buf;
}

} // namespace specfission
