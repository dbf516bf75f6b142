#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace vmem {

using Date = std::chrono::year_month_day;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Returns nullopt when the
/// text is not a valid date.
std::optional<Date> parse_date(std::string_view text);

std::string format_date(const Date& date);

}  // namespace vmem
