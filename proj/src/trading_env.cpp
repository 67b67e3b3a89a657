#include "bullbear/trading_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "bullbear/errors.hpp"

namespace bullbear {

void EnvConfig::validate() const {
    if (!(initial_cash > 0.0)) throw InvalidParams("initial cash must be positive");
    if (!(cost_rate >= 0.0 && cost_rate < 1.0)) throw InvalidParams("cost rate must lie in [0, 1)");
}

Vector EnvState::weights() const {
    const double v = value();
    return (p.array() * h.array()) / v;
}

double EnvState::cash_fraction() const { return b / value(); }

void TradeAction::validate() const {
    if (!a.allFinite()) throw InvalidParams("action has non-finite entries");
    if (a.size() > 0 && a.cwiseAbs().maxCoeff() > 1.0) throw InvalidParams("action entries must lie in [-1, 1]");
}

EnvState reset(const PriceSeries& ps, double initial_cash, std::size_t start_t) {
    if (!(initial_cash > 0.0)) throw InvalidParams("initial cash must be positive");
    if (ps.days() < 2 || start_t >= ps.days() - 1)
        throw OutOfRange("start index " + std::to_string(start_t) + " leaves no step in a " +
                         std::to_string(ps.days()) + "-day series");
    EnvState s;
    s.t = start_t;
    s.p = ps.prices.row(static_cast<Eigen::Index>(start_t)).transpose();
    s.h = Vector::Zero(static_cast<Eigen::Index>(ps.assets()));
    s.b = initial_cash;
    return s;
}

StepResult step(const EnvState& state, const TradeAction& action, const PriceSeries& ps, double cost_rate) {
    if (state.t + 1 >= ps.days()) throw EpisodeDone("episode already finished at t=" + std::to_string(state.t));
    const auto n = state.p.size();
    if (action.a.size() != n) throw ShapeMismatch("action length does not match asset count");
    action.validate();
    if (cost_rate < 0.0) throw InvalidParams("cost rate must be >= 0");

    const double v = state.value();
    const Vector& p = state.p;
    Vector dh = Vector::Zero(n);
    double cash = state.b;
    double cost = 0.0;

    // Sells, capped at current holdings.
    for (Eigen::Index i = 0; i < n; ++i) {
        if (action.a(i) >= 0.0) continue;
        const double want = action.a(i) * v / p(i);
        dh(i) = std::max(want, -state.h(i));
        const double notional = -dh(i) * p(i);
        cash += notional;
        cost += cost_rate * notional;
    }
    cash -= cost;

    // Buys, scaled by one common factor if they would overdraw cash.
    double buy_spend = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (action.a(i) > 0.0) buy_spend += action.a(i) * v * (1.0 + cost_rate);
    }
    double scale = 1.0;
    bool exhausted = false;
    if (buy_spend > 0.0 && buy_spend > cash) {
        scale = std::max(0.0, cash) / buy_spend;
        exhausted = true;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (action.a(i) <= 0.0) continue;
        const double notional = scale * action.a(i) * v;
        dh(i) = notional / p(i);
        cash -= notional * (1.0 + cost_rate);
        cost += notional * cost_rate;
    }
    if (exhausted || cash < 0.0) cash = 0.0;

    StepResult out;
    out.executed = (dh.array() * p.array()) / v;
    out.cost_paid = cost;

    EnvState& next = out.next_state;
    next.t = state.t + 1;
    next.h = (state.h + dh).cwiseMax(0.0);
    next.b = cash;
    next.p = ps.prices.row(static_cast<Eigen::Index>(next.t)).transpose();

    // Trading is value-neutral at time-t prices apart from costs, so the
    // change in value is the mark-to-market gain on the new holdings.
    out.reward = next.h.dot(next.p - p) - cost;
    out.done = next.t + 1 == ps.days();
    return out;
}

double portfolio_value(const EnvState& state) { return state.value(); }

Regime regime_signal(const std::vector<double>& index, std::size_t t, std::size_t window) {
    if (window < 1) throw InvalidParams("regime window must be >= 1");
    if (t >= index.size()) throw OutOfRange("regime index out of range");
    const std::size_t first = t + 1 >= window ? t + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = first; k <= t; ++k) sum += index[k];
    const double mean = sum / static_cast<double>(t - first + 1);
    return index[t] >= mean ? Regime::Bull : Regime::Bear;
}

std::size_t feature_size(std::size_t assets, std::size_t lookback) { return assets * lookback + assets + 1; }

Vector state_features(const EnvState& state, const PriceSeries& ps, std::size_t lookback) {
    const auto n = static_cast<Eigen::Index>(ps.assets());
    Vector f = Vector::Zero(static_cast<Eigen::Index>(feature_size(ps.assets(), lookback)));
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 1; k <= lookback; ++k, ++pos) {
            if (k > state.t) continue;
            const double past = ps.prices(static_cast<Eigen::Index>(state.t - k), i);
            f(pos) = std::log(state.p(i) / past);
        }
    }
    f.segment(pos, n) = state.weights();
    f(pos + n) = state.cash_fraction();
    return f;
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    const auto d = rows.empty() ? 0 : rows.front().w.size();
    os << "t,date,V,b,reward";
    for (Eigen::Index i = 0; i < d; ++i) os << ",w_" << (i + 1);
    for (Eigen::Index i = 0; i < d; ++i) os << ",exec_" << (i + 1);
    os << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.t << ',' << r.date.to_string() << ',' << r.value << ',' << r.cash << ',' << r.reward;
        for (Eigen::Index i = 0; i < d; ++i) os << ',' << r.w(i);
        for (Eigen::Index i = 0; i < d; ++i) os << ',' << (r.executed.size() ? r.executed(i) : 0.0);
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace bullbear
