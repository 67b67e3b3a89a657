/**
 * @file market_data.hpp
 * @brief Daily close-price panels: CSV ingestion, gap cleaning, returns,
 *        a regime-switching GBM generator and a price-weighted index proxy.
 */
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bullbear/date.hpp"

namespace bullbear {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Regime { Bull, Bear };

const char* to_string(Regime r);

/// Dense T x D panel of strictly positive close prices.
struct PriceSeries {
    std::vector<std::string> asset_ids;
    std::vector<Date> dates;
    Matrix prices;  // rows = days, columns = assets

    std::size_t days() const { return dates.size(); }
    std::size_t assets() const { return asset_ids.size(); }

    /// Throws EmptySeries / InvalidParams when an invariant does not hold.
    void validate() const;

    /// Rows [begin, end).
    PriceSeries slice(std::size_t begin, std::size_t end) const;

    /// Rows whose date lies in [first, last].
    PriceSeries between(Date first, Date last) const;

    /// Index of the first row with date >= d, or days() if none.
    std::size_t lower_bound(Date d) const;
};

/// (T-1) x D simple returns, dated by the later day of each pair.
struct ReturnSeries {
    std::vector<std::string> asset_ids;
    std::vector<Date> dates;
    Matrix returns;
};

struct RejectedRow {
    std::size_t line = 0;
    std::size_t column = 0;
    std::string reason;
};

struct CsvLoad {
    PriceSeries series;
    std::vector<RejectedRow> rejected;
};

/// Reads `date,TICKER1,...` wide CSV. Rows holding a non-numeric or
/// non-positive price are dropped and reported in `rejected`; structural
/// problems (bad header, bad date, wrong cell count, duplicate date) throw
/// ParseError. Output rows are sorted by date.
CsvLoad load_csv(const std::filesystem::path& path);

void write_csv(const PriceSeries& ps, const std::filesystem::path& path);

/// Observations of one asset; dates need not be sorted.
struct AssetHistory {
    std::string id;
    std::vector<std::pair<Date, double>> observations;
};

/// Restricts to the common date range, forward-fills internal gaps and
/// returns a dense panel.
PriceSeries align_and_clean(const std::vector<AssetHistory>& raw);

ReturnSeries simple_returns(const PriceSeries& ps);

struct GbmParams {
    std::size_t d = 5;
    std::size_t t = 1500;
    Vector p0;          // empty -> 100 for every asset
    Vector mu_bull;     // annualized drift per asset
    Vector mu_bear;
    Vector sigma_bull;  // annualized volatility per asset
    Vector sigma_bear;
    Matrix corr;        // empty -> identity
    double regime_switch_prob = 0.0;
    Regime initial_regime = Regime::Bull;
    int days_per_year = 252;
    std::uint64_t seed = 0;
    Date start_date = Date(2001, 1, 2);

    /// Throws InvalidParams on shape or range violations, including a
    /// correlation matrix that is not positive semi-definite.
    void validate() const;
};

struct SyntheticMarket {
    PriceSeries series;
    std::vector<Regime> regimes;  // one label per day
};

/// Correlated geometric Brownian motion whose drift and volatility follow
/// a two-state Markov regime. Business-day dates from `start_date`.
SyntheticMarket synth_market(const GbmParams& params);

void write_regime_csv(const std::vector<Date>& dates, const std::vector<Regime>& regimes,
                      const std::filesystem::path& path);
std::vector<Regime> read_regime_csv(const std::filesystem::path& path);

/// Price-weighted index rescaled so that the first level is 100.
std::vector<double> index_series(const PriceSeries& ps);

}  // namespace bullbear
