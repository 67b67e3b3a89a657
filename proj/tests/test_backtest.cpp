#include <doctest.h>

#include <random>

#include "bullbear/backtest.hpp"
#include "bullbear/errors.hpp"
#include "support.hpp"

using namespace bullbear;

namespace {

PriceSeries random_market(std::size_t days, std::size_t assets, std::uint64_t seed, double vol = 0.01) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix p(static_cast<Eigen::Index>(days), static_cast<Eigen::Index>(assets));
    for (Eigen::Index i = 0; i < p.cols(); ++i) p(0, i) = 20.0 + 15.0 * static_cast<double>(i);
    for (Eigen::Index t = 1; t < p.rows(); ++t)
        for (Eigen::Index i = 0; i < p.cols(); ++i)
            p(t, i) = p(t - 1, i) * std::exp(0.0003 * static_cast<double>(i) + vol * (1.0 + 0.3 * i) * n(rng));
    return testing::make_series(p);
}

RlAgentStrategy agent_strategy(std::size_t assets, std::size_t lookback, std::uint64_t seed) {
    AdaptiveConfig cfg;
    cfg.actor_hidden = {8};
    cfg.critic_hidden = {8};
    return {AgentNets::create(feature_size(assets, lookback), assets, cfg, seed), lookback};
}

std::vector<Strategy> all_strategies(std::size_t assets) {
    AllocationConstraints c{0.0, 0.6, 1.0};
    return {agent_strategy(assets, 5, 1), BuyAndHoldIndex{}, MinVarianceStrategy{5, 20, c, false},
            MeanVarianceStrategy{5, 20, c, false, 0.0}};
}

void check_report_invariants(const BacktestReport& r, std::size_t days, int dpy = 252) {
    REQUIRE(r.curve.values.size() == days);
    CHECK(r.curve.dates.size() == days);
    CHECK(r.final_value == r.curve.values.back());
    CHECK(r.initial_value == r.curve.values.front());
    for (double v : r.curve.values) CHECK(v > 0.0);
    const double recomputed =
        std::pow(r.final_value / r.initial_value, static_cast<double>(dpy) / static_cast<double>(days - 1)) - 1.0;
    CHECK(std::abs(recomputed - r.annualized_return) < 1e-12);
}

}  // namespace

TEST_SUITE("backtest") {

TEST_CASE("annualized return") {
    std::vector<double> year(253);
    for (std::size_t t = 0; t < year.size(); ++t) year[t] = 100.0 * std::pow(2.0, t / 252.0);
    CHECK(annualized_return(year) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(annualized_return(std::vector<double>(50, 7.0)) == 0.0);

    std::vector<double> reference(1191, 10000.0);
    reference.back() = 21880.0;
    const double r = annualized_return(reference);
    CHECK(std::abs(r - 0.1804) < 1e-4);
    CHECK(r == doctest::Approx(std::exp(std::log(2.188) * 252.0 / 1190.0) - 1.0).epsilon(1e-13));

    // Other calendars only change the exponent.
    CHECK(annualized_return(year, 126) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
    CHECK_THROWS_AS(annualized_return(std::vector<double>{1.0}), DegenerateCurve);
    CHECK_THROWS_AS(annualized_return(std::vector<double>{1.0, 0.0}), DegenerateCurve);
}

TEST_CASE("annualized std") {
    CHECK(annualized_std(std::vector<double>(10, 3.0)) == 0.0);

    // Daily returns +1%, -1%, +1%, -1%: mean 0, sample variance 4e-4 / 3.
    std::vector<double> v{100.0};
    for (int k = 0; k < 4; ++k) v.push_back(v.back() * (k % 2 ? 0.99 : 1.01));
    const double expected = std::sqrt(4e-4 / 3.0) * std::sqrt(252.0);
    CHECK(annualized_std(v) == doctest::Approx(expected).epsilon(1e-12));

    std::vector<double> scaled = v;
    for (double& x : scaled) x *= 10.0;
    CHECK(annualized_std(scaled) == doctest::Approx(annualized_std(v)).epsilon(1e-13));
    CHECK(annualized_return(scaled) == doctest::Approx(annualized_return(v)).epsilon(1e-13));
    CHECK_THROWS_AS(annualized_std(std::vector<double>{1.0, 2.0}), DegenerateCurve);
}

TEST_CASE("Sharpe ratio") {
    CHECK(std::abs(sharpe_ratio(0.1884, 0.1159) - 1.626) < 5e-4);
    CHECK(std::round(sharpe_ratio(0.1884, 0.1159) * 100.0) / 100.0 == 1.63);
    CHECK(sharpe_ratio(0.1, 0.2, 0.02) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK_THROWS_AS(sharpe_ratio(0.1, 0.0), ZeroVolatility);
    CHECK_THROWS_AS(sharpe_ratio(std::vector<double>(20, 1.0)), ZeroVolatility);

    const PriceSeries ps = random_market(100, 1, 4);
    std::vector<double> curve(ps.prices.col(0).data(), ps.prices.col(0).data() + 100);
    CHECK(std::abs(sharpe_ratio(curve, annualized_return(curve))) < 1e-14);
    CHECK(sharpe_ratio(curve) == doctest::Approx(annualized_return(curve) / annualized_std(curve)).epsilon(1e-14));
}

TEST_CASE("dominating curves never annualize lower") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.9, 1.1), bump(0.0, 0.05);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> a{100.0};
        for (int t = 0; t < 30; ++t) a.push_back(a.back() * u(rng));
        std::vector<double> b = a;
        for (double& x : b) x += bump(rng) * x;
        b.back() = std::max(b.back(), a.back() * 1.0001);
        b.front() = a.front();
        CHECK(annualized_return(b) >= annualized_return(a));
    }
}

TEST_CASE("flat prices give flat curves for every strategy") {
    const PriceSeries ps = testing::make_series(Matrix::Constant(60, 3, 25.0));
    BacktestOptions opts;
    for (const auto& s : all_strategies(3)) {
        const BacktestReport r = run_backtest(s, ps, opts);
        check_report_invariants(r, 60);
        for (double v : r.curve.values) CHECK(v == opts.initial_cash);
        CHECK(r.annualized_return == 0.0);
        CHECK(r.annualized_std == 0.0);
        CHECK(std::isnan(r.sharpe_ratio));
    }
}

TEST_CASE("buy and hold") {
    SUBCASE("every asset gains 1% a day") {
        const PriceSeries ps = testing::drift_series(40, {0.01, 0.01, 0.01});
        const BacktestReport r = run_backtest(BuyAndHoldIndex{}, ps, {});
        check_report_invariants(r, 40);
        for (std::size_t t = 0; t < 40; ++t)
            CHECK(r.curve.values[t] == doctest::Approx(10000.0 * std::pow(1.01, static_cast<double>(t))).epsilon(1e-12));
        CHECK(r.annualized_return == doctest::Approx(std::pow(1.01, 252.0) - 1.0).epsilon(1e-10));
    }
    SUBCASE("single asset tracks its price") {
        const PriceSeries ps = random_market(300, 1, 6, 0.02);
        const BacktestReport r = run_backtest(BuyAndHoldIndex{}, ps, {});
        CHECK(std::abs(r.final_value / r.initial_value - ps.prices(299, 0) / ps.prices(0, 0)) < 1e-9);
    }
    SUBCASE("weights follow day-0 prices and never change") {
        const PriceSeries ps = random_market(50, 3, 7);
        BacktestOptions opts;
        opts.eval_begin = 10;
        const BacktestReport r = run_backtest(BuyAndHoldIndex{}, ps, opts);
        check_report_invariants(r, 40);
        const auto index = index_series(ps);
        for (std::size_t t = 10; t < 50; ++t)
            CHECK(r.curve.values[t - 10] == doctest::Approx(10000.0 * index[t] / index[10]).epsilon(1e-12));
        CHECK(r.curve.dates.front() == ps.dates[10]);
    }
}

TEST_CASE("learned strategy") {
    const PriceSeries ps = random_market(80, 3, 8);
    BacktestOptions opts;
    opts.eval_begin = 20;
    const auto s = agent_strategy(3, 5, 3);
    const BacktestReport a = run_backtest(s, ps, opts, 1, "agent");
    const BacktestReport b = run_backtest(s, ps, opts, 1, "agent");
    check_report_invariants(a, 60);
    CHECK(a.curve.values == b.curve.values);
    CHECK(a.strategy == "agent");
    CHECK(a.rebalances.empty());

    // The greedy report equals a direct rollout of the same policy.
    EnvConfig env;
    env.lookback = 5;
    const Rollout direct = rollout(s.nets, ps, env, 20);
    REQUIRE(direct.values.size() == a.curve.values.size());
    for (std::size_t t = 0; t < direct.values.size(); ++t)
        CHECK(direct.values[t] == doctest::Approx(a.curve.values[t]).epsilon(1e-12));

    RlAgentStrategy noisy = s;
    noisy.stochastic = true;
    const BacktestReport n1 = run_backtest(noisy, ps, opts, 1);
    const BacktestReport n2 = run_backtest(noisy, ps, opts, 1);
    const BacktestReport n3 = run_backtest(noisy, ps, opts, 2);
    CHECK(n1.curve.values == n2.curve.values);
    CHECK(n1.curve.values != n3.curve.values);

    CHECK_THROWS_AS(run_backtest(agent_strategy(2, 5, 1), ps, opts), ShapeMismatch);
}

TEST_CASE("optimizer strategies") {
    const PriceSeries ps = random_market(200, 4, 9);
    const AllocationConstraints c{0.05, 0.5, 1.0};
    BacktestOptions opts;
    opts.eval_begin = 100;
    opts.cost_rate = 0.001;

    const std::vector<Strategy> strategies{MinVarianceStrategy{10, 60, c, false},
                                           MeanVarianceStrategy{10, 60, c, false, 0.0},
                                           MinVarianceStrategy{10, 60, c, true},
                                           MeanVarianceStrategy{7, 30, c, true, 0.01}};
    for (const auto& s : strategies) {
        const BacktestReport r = run_backtest(s, ps, opts);
        check_report_invariants(r, 100);
        REQUIRE_FALSE(r.rebalances.empty());
        for (const auto& rb : r.rebalances) {
            CHECK(c.satisfied_by(rb.target, 1e-8));
            CHECK(rb.t >= 100);
        }
        CHECK(run_backtest(s, ps, opts).curve.values == r.curve.values);
    }

    // Rolling mode refits every 10 days from the first evaluation day.
    const BacktestReport rolling = run_backtest(strategies[0], ps, opts);
    CHECK(rolling.rebalances.size() == 10);
    for (std::size_t k = 0; k < rolling.rebalances.size(); ++k) CHECK(rolling.rebalances[k].t == 100 + 10 * k);

    // The first target is the constrained minimum-variance portfolio of the trailing window.
    const Matrix returns = ps.prices.middleRows(41, 60).cwiseQuotient(ps.prices.middleRows(40, 60)).array() - 1.0;
    const Vector w = min_variance(estimate_moments(returns), c);
    CHECK((rolling.rebalances[0].target - w).cwiseAbs().maxCoeff() < 1e-9);

    // Static mode holds one target fitted on the history before the evaluation start.
    const BacktestReport fixed = run_backtest(strategies[2], ps, opts);
    for (const auto& rb : fixed.rebalances) CHECK((rb.target - fixed.rebalances[0].target).cwiseAbs().maxCoeff() == 0.0);

    const PriceSeries short_ps = random_market(40, 4, 9);
    CHECK_THROWS_AS(run_backtest(MinVarianceStrategy{5, 39, c, false}, short_ps, {}), InsufficientData);
    CHECK_NOTHROW(run_backtest(MinVarianceStrategy{5, 38, c, false}, short_ps, {}));
}

TEST_CASE("comparison table") {
    const PriceSeries ps = random_market(120, 3, 10);
    BacktestOptions opts;
    opts.eval_begin = 40;

    const auto one = compare({{"Index", {BuyAndHoldIndex{}}, {0}}}, ps, opts);
    REQUIRE(one.size() == 1);
    CHECK(one[0].name == "Index");
    CHECK(one[0].final_value_sd == 0.0);

    const AllocationConstraints c{0.0, 0.6, 1.0};
    std::vector<ComparisonEntry> entries{
        {"Agent", {agent_strategy(3, 5, 1), agent_strategy(3, 5, 2), agent_strategy(3, 5, 3)}, {1, 2, 3}},
        {"Min-variance", {MinVarianceStrategy{21, 30, c, false}}, {0}},
        {"Index", {BuyAndHoldIndex{}}, {0}},
        {"Index again", {BuyAndHoldIndex{}}, {0}},
    };
    const auto rows = compare(entries, ps, opts);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(rows[i].name == entries[i].name);
    CHECK(rows[2].final_value == rows[3].final_value);
    CHECK(rows[2].sharpe_ratio == rows[3].sharpe_ratio);

    const auto& agent = rows[0];
    REQUIRE(agent.runs.size() == 3);
    double mean = 0.0, sq = 0.0;
    for (const auto& r : agent.runs) mean += r.final_value / 3.0;
    for (const auto& r : agent.runs) sq += (r.final_value - mean) * (r.final_value - mean);
    CHECK(agent.final_value == doctest::Approx(mean).epsilon(1e-14));
    CHECK(agent.final_value_sd == doctest::Approx(std::sqrt(sq / 2.0)).epsilon(1e-12));
    CHECK(agent.runs[1].seed == 2);

    testing::TempDir dir("cmp");
    write_summary_csv(rows, dir / "summary.csv");
    const std::string csv = testing::read_file(dir / "summary.csv");
    CHECK(csv.rfind("strategy,initial,final,ann_return,ann_std,sharpe\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    write_equity_csv(rows[2].runs[0].curve, dir / "eq.csv");
    const std::string eq = testing::read_file(dir / "eq.csv");
    CHECK(eq.rfind("date,value\n" + ps.dates[40].to_string() + ",10000", 0) == 0);
    CHECK(std::count(eq.begin(), eq.end(), '\n') == 81);

    const auto j = to_json(rows[0]);
    CHECK(j.at("runs").size() == 3);
    CHECK(j.at("strategy") == "Agent");
    const auto flat = run_backtest(BuyAndHoldIndex{}, testing::make_series(Matrix::Constant(10, 2, 1.0)), {});
    CHECK(to_json(flat).at("sharpe").is_null());
}

}  // TEST_SUITE
