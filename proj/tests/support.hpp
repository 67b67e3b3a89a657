// Shared fixtures for the unit tests.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "bullbear/market_data.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("bullbear_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Business-day dated panel from a row-major price list.
inline bullbear::PriceSeries make_series(const bullbear::Matrix& prices) {
    bullbear::PriceSeries ps;
    for (Eigen::Index i = 0; i < prices.cols(); ++i) ps.asset_ids.push_back("A" + std::to_string(i + 1));
    ps.dates = bullbear::business_days(bullbear::Date(2020, 1, 1), static_cast<std::size_t>(prices.rows()));
    ps.prices = prices;
    return ps;
}

/// Each asset compounds at its own constant daily rate from 100.
inline bullbear::PriceSeries drift_series(std::size_t days, const std::vector<double>& daily) {
    bullbear::Matrix p(static_cast<Eigen::Index>(days), static_cast<Eigen::Index>(daily.size()));
    for (std::size_t t = 0; t < days; ++t)
        for (std::size_t i = 0; i < daily.size(); ++i)
            p(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = 100.0 * std::pow(1.0 + daily[i], static_cast<double>(t));
    return make_series(p);
}

}  // namespace testing
