#include "bullbear/backtest.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "bullbear/errors.hpp"

namespace bullbear {

double annualized_return(std::span<const double> values, int days_per_year) {
    if (values.size() < 2) throw DegenerateCurve("annualized return needs at least 2 points");
    if (!(values.front() > 0.0) || !(values.back() > 0.0)) throw DegenerateCurve("curve values must be positive");
    const double periods = static_cast<double>(values.size() - 1);
    return std::pow(values.back() / values.front(), static_cast<double>(days_per_year) / periods) - 1.0;
}

double annualized_std(std::span<const double> values, int days_per_year) {
    if (values.size() < 3) throw DegenerateCurve("annualized std needs at least 3 points");
    const std::size_t n = values.size() - 1;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(values[i] > 0.0)) throw DegenerateCurve("curve values must be positive");
        r[i] = values[i + 1] / values[i] - 1.0;
    }
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(n - 1)) * std::sqrt(static_cast<double>(days_per_year));
}

double sharpe_ratio(double annual_return, double annual_std, double rf) {
    if (!(annual_std > 0.0)) throw ZeroVolatility("Sharpe ratio of a riskless curve");
    return (annual_return - rf) / annual_std;
}

double sharpe_ratio(std::span<const double> values, double rf, int days_per_year) {
    return sharpe_ratio(annualized_return(values, days_per_year), annualized_std(values, days_per_year), rf);
}

namespace {

const char* default_name(const Strategy& s) {
    struct Visitor {
        const char* operator()(const RlAgentStrategy&) const { return "RL agent"; }
        const char* operator()(const BuyAndHoldIndex&) const { return "Index"; }
        const char* operator()(const MinVarianceStrategy&) const { return "Min-variance"; }
        const char* operator()(const MeanVarianceStrategy&) const { return "Mean-variance"; }
    };
    return std::visit(Visitor{}, s);
}

/// Rebalancing driver shared by the two optimizer strategies.
class OptimizerPolicy {
public:
    OptimizerPolicy(std::size_t every, std::size_t window, bool static_fit, const PriceSeries& ps, std::size_t begin)
        : every_(every), window_(window), static_fit_(static_fit), ps_(ps), begin_(begin) {
        if (every_ < 1) throw InvalidParams("rebalance_every must be >= 1");
        if (window_ < 2) throw InvalidParams("estimation window must be >= 2 returns");
        if (ps.days() < window_ + 2) throw InsufficientData("price series shorter than estimation window + 2 days");
        if (static_fit_ && begin_ < 3) throw InsufficientData("static fit needs history before the evaluation start");
        if (!static_fit_ && ps.days() - 1 <= window_)
            throw InsufficientData("no trading day has a full estimation window");
    }

    /// Returns returns to estimate from if a rebalance is due at day t.
    std::optional<Matrix> due(std::size_t t) {
        if (static_fit_) {
            if (done_) return std::nullopt;
            done_ = true;
            return window_returns(0, t);
        }
        if (t < window_) return std::nullopt;
        if (last_ && t - *last_ < every_) return std::nullopt;
        last_ = t;
        return window_returns(t - window_, t);
    }

private:
    Matrix window_returns(std::size_t first, std::size_t last) const {
        const auto a = static_cast<Eigen::Index>(first);
        const auto n = static_cast<Eigen::Index>(last - first);
        return ps_.prices.middleRows(a + 1, n).cwiseQuotient(ps_.prices.middleRows(a, n)).array() - 1.0;
    }

    std::size_t every_;
    std::size_t window_;
    bool static_fit_;
    const PriceSeries& ps_;
    std::size_t begin_;
    std::optional<std::size_t> last_;
    bool done_ = false;
};

}  // namespace

BacktestReport run_backtest(const Strategy& strategy, const PriceSeries& ps, const BacktestOptions& opts,
                            std::uint64_t seed, std::string name) {
    ps.validate();
    if (opts.eval_begin + 1 >= ps.days()) throw InsufficientData("evaluation range has fewer than 2 days");

    BacktestReport report;
    report.strategy = name.empty() ? default_name(strategy) : std::move(name);
    report.seed = seed;

    EnvState state = reset(ps, opts.initial_cash, opts.eval_begin);
    const auto d = static_cast<Eigen::Index>(ps.assets());

    std::optional<OptimizerPolicy> policy;
    std::optional<NoiseProcess> noise;
    std::size_t lookback = 0;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, RlAgentStrategy>) {
                lookback = s.lookback;
                if (s.nets.feature_dim() != feature_size(ps.assets(), s.lookback) ||
                    s.nets.action_dim() != ps.assets())
                    throw ShapeMismatch("agent networks do not match the asset count and lookback");
                if (s.stochastic)
                    noise.emplace(NoiseKind::Positive, ps.assets(), s.noise_scale, s.noise_theta, derive_seed(seed, 7));
            } else if constexpr (std::is_same_v<S, MinVarianceStrategy> || std::is_same_v<S, MeanVarianceStrategy>) {
                s.constraints.check_feasible(ps.assets());
                policy.emplace(s.rebalance_every, s.estimation_window, s.static_fit, ps, opts.eval_begin);
            }
        },
        strategy);

    // The curve accumulates the environment's rewards, so a motionless
    // market yields an exactly flat curve.
    report.curve.dates.push_back(ps.dates[state.t]);
    report.curve.values.push_back(opts.initial_cash);

    bool done = false;
    while (!done) {
        TradeAction action{Vector::Zero(d)};
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, RlAgentStrategy>) {
                    action = select_action(s.nets, state_features(state, ps, lookback), noise ? &*noise : nullptr);
                } else if constexpr (std::is_same_v<S, BuyAndHoldIndex>) {
                    if (state.t == opts.eval_begin) action.a = state.p / state.p.sum();
                } else {
                    auto returns = policy->due(state.t);
                    if (!returns) return;
                    const Moments m = estimate_moments(*returns, opts.days_per_year);
                    Vector target;
                    if constexpr (std::is_same_v<S, MinVarianceStrategy>) {
                        target = min_variance(m, s.constraints);
                    } else {
                        try {
                            target = max_sharpe(m, s.rf, s.constraints);
                        } catch (const Degenerate&) {
                            target = min_variance(m, s.constraints);
                        }
                    }
                    report.rebalances.push_back({state.t, target});
                    action.a = (target - state.weights()).cwiseMax(-1.0).cwiseMin(1.0);
                }
            },
            strategy);

        StepResult r = step(state, action, ps, opts.cost_rate);
        done = r.done;
        state = std::move(r.next_state);
        report.curve.dates.push_back(ps.dates[state.t]);
        report.curve.values.push_back(report.curve.values.back() + r.reward);
    }

    const auto& v = report.curve.values;
    report.initial_value = v.front();
    report.final_value = v.back();
    report.annualized_return = annualized_return(v, opts.days_per_year);
    report.annualized_std = v.size() >= 3 ? annualized_std(v, opts.days_per_year) : 0.0;
    report.sharpe_ratio = report.annualized_std > 0.0
                              ? sharpe_ratio(report.annualized_return, report.annualized_std, opts.rf)
                              : std::numeric_limits<double>::quiet_NaN();
    return report;
}

std::vector<ComparisonRow> compare(const std::vector<ComparisonEntry>& entries, const PriceSeries& ps,
                                   const BacktestOptions& opts) {
    if (entries.empty()) throw InvalidParams("compare needs at least one strategy");
    std::vector<ComparisonRow> rows;
    for (const auto& e : entries) {
        if (e.runs.empty()) throw InvalidParams("strategy '" + e.name + "' has no runs");
        ComparisonRow row;
        row.name = e.name;
        for (std::size_t k = 0; k < e.runs.size(); ++k) {
            const std::uint64_t seed = k < e.seeds.size() ? e.seeds[k] : k;
            row.runs.push_back(run_backtest(e.runs[k], ps, opts, seed, e.name));
        }
        const double n = static_cast<double>(row.runs.size());
        auto mean_of = [&](auto field) {
            double s = 0.0;
            for (const auto& r : row.runs) s += r.*field;
            return s / n;
        };
        auto sd_of = [&](auto field, double mean) {
            if (row.runs.size() < 2) return 0.0;
            double s = 0.0;
            for (const auto& r : row.runs) s += (r.*field - mean) * (r.*field - mean);
            return std::sqrt(s / (n - 1.0));
        };
        row.initial_value = mean_of(&BacktestReport::initial_value);
        row.final_value = mean_of(&BacktestReport::final_value);
        row.annualized_return = mean_of(&BacktestReport::annualized_return);
        row.annualized_std = mean_of(&BacktestReport::annualized_std);
        row.sharpe_ratio = mean_of(&BacktestReport::sharpe_ratio);
        row.final_value_sd = sd_of(&BacktestReport::final_value, row.final_value);
        row.sharpe_sd = sd_of(&BacktestReport::sharpe_ratio, row.sharpe_ratio);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

void write_number(std::ostream& os, double v) {
    if (std::isfinite(v)) os << v;
    else os << "nan";
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void write_summary_csv(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "strategy,initial,final,ann_return,ann_std,sharpe\n" << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.name << ',';
        write_number(os, r.initial_value);
        os << ',';
        write_number(os, r.final_value);
        os << ',';
        write_number(os, r.annualized_return);
        os << ',';
        write_number(os, r.annualized_std);
        os << ',';
        write_number(os, r.sharpe_ratio);
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

void write_equity_csv(const EquityCurve& curve, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "date,value\n" << std::setprecision(17);
    for (std::size_t i = 0; i < curve.values.size(); ++i) os << curve.dates[i].to_string() << ',' << curve.values[i] << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

nlohmann::json to_json(const BacktestReport& r, bool include_curve) {
    nlohmann::json j{{"strategy", r.strategy},
                     {"seed", r.seed},
                     {"initial", r.initial_value},
                     {"final", r.final_value},
                     {"ann_return", number_or_null(r.annualized_return)},
                     {"ann_std", number_or_null(r.annualized_std)},
                     {"sharpe", number_or_null(r.sharpe_ratio)},
                     {"rebalances", r.rebalances.size()}};
    if (include_curve) {
        auto& curve = j["equity_curve"] = nlohmann::json::array();
        for (std::size_t i = 0; i < r.curve.values.size(); ++i)
            curve.push_back({r.curve.dates[i].to_string(), r.curve.values[i]});
    }
    return j;
}

nlohmann::json to_json(const ComparisonRow& row, bool include_curves) {
    nlohmann::json j{{"strategy", row.name},
                     {"initial", row.initial_value},
                     {"final", row.final_value},
                     {"ann_return", number_or_null(row.annualized_return)},
                     {"ann_std", number_or_null(row.annualized_std)},
                     {"sharpe", number_or_null(row.sharpe_ratio)},
                     {"final_sd", row.final_value_sd},
                     {"sharpe_sd", number_or_null(row.sharpe_sd)},
                     {"runs", nlohmann::json::array()}};
    for (const auto& r : row.runs) j["runs"].push_back(to_json(r, include_curves));
    return j;
}

}  // namespace bullbear
