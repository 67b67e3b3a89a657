/**
 * @file trading_env.hpp
 * @brief Daily-bar portfolio trading MDP.
 *
 * State is prices, share holdings and cash. An action is a vector of weight
 * deltas in [-1, 1]: positive buys, negative sells. Trades execute at the
 * current close, sells first, and buys are scaled down together whenever the
 * cash after sells cannot cover them, so cash never goes negative.
 */
#pragma once

#include <filesystem>
#include <vector>

#include "bullbear/market_data.hpp"

namespace bullbear {

/// Episode and accounting settings shared by training and backtests.
struct EnvConfig {
    double initial_cash = 10000.0;
    double cost_rate = 0.0;
    std::size_t lookback = 10;
    std::size_t episode_length = 0;  // 0 = run to the last day
    bool random_start = false;       // training only

    void validate() const;
};

struct EnvState {
    std::size_t t = 0;
    Vector p;  // prices at t
    Vector h;  // shares held (fractional)
    double b = 0.0;

    double value() const { return p.dot(h) + b; }
    /// Stock weights p_i h_i / V; together with cash_fraction() they sum to 1.
    Vector weights() const;
    double cash_fraction() const;
};

struct TradeAction {
    Vector a;

    /// Throws InvalidParams if any |a_i| > 1 or is not finite.
    void validate() const;
};

struct StepResult {
    EnvState next_state;
    double reward = 0.0;  // V(next_state) - V(state)
    bool done = false;
    Vector executed;  // weight deltas actually traded, relative to V at t
    double cost_paid = 0.0;
};

EnvState reset(const PriceSeries& ps, double initial_cash, std::size_t start_t = 0);

/// `cost_rate` is charged on traded notional. The reward is computed as the
/// mark-to-market change h' (p_{t+1} - p_t) less costs, which equals
/// V(next) - V(state) and is exactly zero for frozen prices without costs.
StepResult step(const EnvState& state, const TradeAction& action, const PriceSeries& ps, double cost_rate = 0.0);

double portfolio_value(const EnvState& state);

/// Bull when index[t] is at or above its trailing mean over `window` days.
Regime regime_signal(const std::vector<double>& index, std::size_t t, std::size_t window);

/// [log(p_t / p_{t-k}) for k = 1..lookback, per asset, zero before day 0],
/// then the stock weights, then the cash fraction. Length D*lookback + D + 1.
Vector state_features(const EnvState& state, const PriceSeries& ps, std::size_t lookback);

std::size_t feature_size(std::size_t assets, std::size_t lookback);

/// One row of an episode trace; `w` is measured after the move to t.
struct TraceRow {
    std::size_t t = 0;
    Date date;
    double value = 0.0;
    double cash = 0.0;
    double reward = 0.0;
    Vector w;
    Vector executed;
};

/// `t,date,V,b,reward,w_1..w_D,exec_1..exec_D`
void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path);

}  // namespace bullbear
