#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace esd {

/// Calendar date (UTC, proleptic Gregorian).
using Date = std::chrono::year_month_day;

/// Parses strict ISO-8601 "YYYY-MM-DD". Returns nullopt on any deviation
/// or on an invalid calendar date (e.g. 2021-02-30).
std::optional<Date> parse_date(std::string_view text);

std::string format_date(const Date& d);

inline Date make_date(int y, unsigned m, unsigned d) {
    return std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
}

/// Closed date interval.
struct DateRange {
    Date start;
    Date end;

    bool operator==(const DateRange&) const = default;
};

}  // namespace esd
