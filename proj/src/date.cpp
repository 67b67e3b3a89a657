#include "bullbear/date.hpp"

#include <charconv>
#include <cstdio>
#include <vector>

namespace bullbear {

Date::Date(int year, unsigned month, unsigned day)
    : Date(std::chrono::sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}}) {}

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto field = [&](std::size_t pos, std::size_t len, int& out) {
        auto first = text.data() + pos;
        auto last = first + len;
        auto [ptr, ec] = std::from_chars(first, last, out);
        return ec == std::errc{} && ptr == last;
    };
    int y = 0, m = 0, d = 0;
    if (!field(0, 4, y) || !field(5, 2, m) || !field(8, 2, d)) return std::nullopt;
    if (m < 1 || d < 1) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date(std::chrono::sys_days{ymd});
}

std::string Date::to_string() const {
    std::chrono::year_month_day ymd{sys_days()};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

bool Date::is_weekday() const {
    auto wd = std::chrono::weekday{sys_days()}.c_encoding();
    return wd != 0 && wd != 6;
}

std::vector<Date> business_days(Date start, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    for (Date d = start; out.size() < count; d = d + 1) {
        if (d.is_weekday()) out.push_back(d);
    }
    return out;
}

}  // namespace bullbear
