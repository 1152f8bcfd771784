#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace histwhois {

/// A UTC calendar day, stored as days since 1970-01-01.
class day {
public:
    constexpr day() = default;
    constexpr explicit day(std::int32_t days_since_epoch) : days_(days_since_epoch) {}
    constexpr explicit day(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}

    constexpr std::int32_t count() const { return days_; }
    constexpr std::chrono::sys_days sys() const { return std::chrono::sys_days{std::chrono::days{days_}}; }
    constexpr std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{sys()}; }

    constexpr day next() const { return day{days_ + 1}; }
    constexpr day prev() const { return day{days_ - 1}; }
    constexpr day operator+(std::int32_t n) const { return day{days_ + n}; }
    constexpr day operator-(std::int32_t n) const { return day{days_ - n}; }
    constexpr std::int32_t operator-(day other) const { return days_ - other.days_; }

    constexpr auto operator<=>(const day&) const = default;

    /// Parses exactly eight digits YYYYMMDD; nullopt when malformed or not a real date.
    static std::optional<day> parse(std::string_view s) {
        if (s.size() != 8)
            return std::nullopt;
        int v[8];
        for (std::size_t i = 0; i < 8; ++i) {
            if (s[i] < '0' || s[i] > '9')
                return std::nullopt;
            v[i] = s[i] - '0';
        }
        return from_ymd(v[0] * 1000 + v[1] * 100 + v[2] * 10 + v[3], v[4] * 10 + v[5], v[6] * 10 + v[7]);
    }

    static day parse_or_throw(std::string_view s) {
        if (auto d = parse(s))
            return *d;
        throw std::invalid_argument("invalid date '" + std::string(s) + "', expected YYYYMMDD");
    }

    static std::optional<day> from_ymd(int y, int m, int d) {
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
        if (!ymd.ok())
            return std::nullopt;
        return day{std::chrono::sys_days{ymd}};
    }

    /// YYYYMMDD as an integer, e.g. 20180320.
    std::uint32_t yyyymmdd() const {
        auto ymd = this->ymd();
        return static_cast<std::uint32_t>(int(ymd.year())) * 10000u + unsigned(ymd.month()) * 100u +
               unsigned(ymd.day());
    }

    std::string str() const { return std::to_string(yyyymmdd()); }

private:
    std::int32_t days_ = 0;
};

} // namespace histwhois
