#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bullbear {

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    explicit Date(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}
    Date(int year, unsigned month, unsigned day);

    /// Strict `YYYY-MM-DD`; returns nullopt for anything else, including
    /// impossible dates such as 2021-02-30.
    static std::optional<Date> parse(std::string_view text);

    std::string to_string() const;
    std::chrono::sys_days sys_days() const { return std::chrono::sys_days{std::chrono::days{days_}}; }
    int serial() const noexcept { return days_; }
    bool is_weekday() const;

    Date operator+(int n) const { return Date(sys_days() + std::chrono::days{n}); }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    int days_ = 0;
};

/// First `count` Monday-to-Friday dates on or after `start`.
std::vector<Date> business_days(Date start, std::size_t count);

}  // namespace bullbear
