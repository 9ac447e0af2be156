#pragma once

#include "rbf/error.hpp"

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>

namespace rbf::detail {

/// Strict YYYY-MM-DD parse; nullopt for anything else.
inline std::optional<std::chrono::sys_days> parse_iso_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
    const int y = std::stoi(text.substr(0, 4));
    const unsigned m = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd};
}

inline std::chrono::sys_days require_date(const std::string& text) {
    auto d = parse_iso_date(text);
    if (!d) fail(ErrorCode::ParseError, "not an ISO-8601 date: '" + text + "'");
    return *d;
}

/// Monday of the ISO week containing the date.
inline std::chrono::sys_days week_start(std::chrono::sys_days day) {
    const std::chrono::weekday wd{day};
    const unsigned from_monday = (wd.c_encoding() + 6u) % 7u;
    return day - std::chrono::days{from_monday};
}

inline int month_key(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    return static_cast<int>(ymd.year()) * 12 + static_cast<int>(static_cast<unsigned>(ymd.month()));
}

}  // namespace rbf::detail
