/**
 * @file backtest.hpp
 * @brief Strategy evaluation over held-out prices and the summary metrics.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/agent.hpp"
#include "bullbear/portfolio_opt.hpp"

namespace bullbear {

struct EquityCurve {
    std::vector<Date> dates;
    std::vector<double> values;  // values[0] is the initial capital
};

struct RlAgentStrategy {
    AgentNets nets;
    std::size_t lookback = 10;
    bool stochastic = false;  // add exploration noise during evaluation
    double noise_scale = 0.2;
    double noise_theta = 0.15;
};

/// Holds one share of every asset per unit of index level, i.e. weights
/// proportional to day-0 prices, and never trades again.
struct BuyAndHoldIndex {};

struct MinVarianceStrategy {
    std::size_t rebalance_every = 21;
    std::size_t estimation_window = 252;  // return observations per estimate
    AllocationConstraints constraints{};
    bool static_fit = false;  // fit once on all history before the evaluation start
};

struct MeanVarianceStrategy {
    std::size_t rebalance_every = 21;
    std::size_t estimation_window = 252;
    AllocationConstraints constraints{};
    bool static_fit = false;
    double rf = 0.0;
};

using Strategy = std::variant<RlAgentStrategy, BuyAndHoldIndex, MinVarianceStrategy, MeanVarianceStrategy>;

struct BacktestOptions {
    double initial_cash = 10000.0;
    double cost_rate = 0.0;
    std::size_t eval_begin = 0;  // earlier rows are history only
    int days_per_year = 252;
    double rf = 0.0;  // for the reported Sharpe ratio
};

struct Rebalance {
    std::size_t t = 0;
    Vector target;
};

struct BacktestReport {
    std::string strategy;
    std::uint64_t seed = 0;
    double initial_value = 0.0;
    double final_value = 0.0;
    double annualized_return = 0.0;
    double annualized_std = 0.0;
    double sharpe_ratio = 0.0;  // NaN for a riskless curve
    EquityCurve curve;
    std::vector<Rebalance> rebalances;  // optimizer strategies only
};

/// Daily loop through the trading environment from `eval_begin` to the last
/// day. Throws InsufficientData when an optimizer strategy cannot gather
/// `estimation_window` returns before the series ends.
BacktestReport run_backtest(const Strategy& strategy, const PriceSeries& ps, const BacktestOptions& opts,
                            std::uint64_t seed = 0, std::string name = {});

/// (V_T / V_0)^(days_per_year / (T - 1)) - 1 over the T curve points.
double annualized_return(std::span<const double> values, int days_per_year = 252);
/// Sample std of daily simple returns times sqrt(days_per_year).
double annualized_std(std::span<const double> values, int days_per_year = 252);
/// Throws ZeroVolatility for a riskless curve.
double sharpe_ratio(std::span<const double> values, double rf = 0.0, int days_per_year = 252);
/// (annual_return - rf) / annual_std.
double sharpe_ratio(double annual_return, double annual_std, double rf = 0.0);

struct ComparisonEntry {
    std::string name;
    std::vector<Strategy> runs;  // one per seed for learned strategies
    std::vector<std::uint64_t> seeds;
};

struct ComparisonRow {
    std::string name;
    double initial_value = 0.0;
    double final_value = 0.0;  // means across runs
    double annualized_return = 0.0;
    double annualized_std = 0.0;
    double sharpe_ratio = 0.0;
    double final_value_sd = 0.0;  // spread across runs, 0 for a single run
    double sharpe_sd = 0.0;
    std::vector<BacktestReport> runs;
};

/// One row per entry, in input order.
std::vector<ComparisonRow> compare(const std::vector<ComparisonEntry>& entries, const PriceSeries& ps,
                                   const BacktestOptions& opts);

/// `strategy,initial,final,ann_return,ann_std,sharpe`
void write_summary_csv(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path);
/// `date,value`
void write_equity_csv(const EquityCurve& curve, const std::filesystem::path& path);

nlohmann::json to_json(const BacktestReport& r, bool include_curve = true);
nlohmann::json to_json(const ComparisonRow& row, bool include_curves = true);

}  // namespace bullbear
