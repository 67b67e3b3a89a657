#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "app.hpp"
#include "bullbear/agent.hpp"
#include "bullbear/backtest.hpp"
#include "bullbear/errors.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/portfolio_opt.hpp"

namespace py = pybind11;
using namespace bullbear;

namespace {

nlohmann::json to_cpp(const py::object& obj) {
    if (obj.is_none()) return nlohmann::json::object();
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(text);
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<std::string> date_strings(const std::vector<Date>& dates) {
    std::vector<std::string> out;
    out.reserve(dates.size());
    for (const Date& d : dates) out.push_back(d.to_string());
    return out;
}

Date parse_date(const std::string& text) {
    const auto d = Date::parse(text);
    if (!d) throw InvalidParams("bad date '" + text + "'");
    return *d;
}

std::vector<std::string> regime_names(const std::vector<Regime>& regimes) {
    std::vector<std::string> out;
    for (Regime r : regimes) out.emplace_back(to_string(r));
    return out;
}

PriceSeries make_series(const Matrix& prices, const std::vector<std::string>& asset_ids,
                        const std::vector<std::string>& dates, const std::string& start) {
    PriceSeries ps;
    ps.prices = prices;
    ps.asset_ids = asset_ids;
    if (ps.asset_ids.empty())
        for (Eigen::Index j = 0; j < prices.cols(); ++j) ps.asset_ids.push_back("A" + std::to_string(j + 1));
    if (dates.empty()) {
        ps.dates = business_days(parse_date(start), static_cast<std::size_t>(prices.rows()));
    } else {
        for (const auto& d : dates) ps.dates.push_back(parse_date(d));
    }
    ps.validate();
    return ps;
}

py::dict report_dict(const BacktestReport& r) {
    py::dict d = to_py(to_json(r)).cast<py::dict>();
    d["sharpe"] = r.sharpe_ratio;
    d["equity_dates"] = date_strings(r.curve.dates);
    return d;
}

}  // namespace

PYBIND11_MODULE(_bullbear, m) {
    m.doc() = "Adaptive DDPG portfolio agent, Markowitz baselines and backtests";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto data_error = py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<FileNotFound>(m, "FileNotFound", data_error.ptr());
    py::register_exception<ParseError>(m, "ParseError", data_error.ptr());
    py::register_exception<EmptySeries>(m, "EmptySeries", data_error.ptr());
    py::register_exception<InsufficientData>(m, "InsufficientData", data_error.ptr());
    py::register_exception<InvalidParams>(m, "InvalidParams", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());
    py::register_exception<Infeasible>(m, "Infeasible", error.ptr());
    py::register_exception<Degenerate>(m, "Degenerate", error.ptr());
    py::register_exception<ZeroVolatility>(m, "ZeroVolatility", error.ptr());
    py::register_exception<InvalidShape>(m, "InvalidShape", error.ptr());

    // Market data

    py::class_<PriceSeries>(m, "PriceSeries")
        .def(py::init(&make_series), py::arg("prices"), py::arg("asset_ids") = std::vector<std::string>{},
             py::arg("dates") = std::vector<std::string>{}, py::arg("start") = "2001-01-02")
        .def_readonly("asset_ids", &PriceSeries::asset_ids)
        .def_property_readonly("dates", [](const PriceSeries& ps) { return date_strings(ps.dates); })
        .def_readonly("prices", &PriceSeries::prices)
        .def("days", &PriceSeries::days)
        .def("assets", &PriceSeries::assets)
        .def("slice", &PriceSeries::slice, py::arg("begin"), py::arg("end"))
        .def("__len__", &PriceSeries::days);

    m.def(
        "load_csv",
        [](const std::filesystem::path& path) {
            CsvLoad load = load_csv(path);
            std::vector<py::tuple> rejected;
            for (const auto& r : load.rejected) rejected.push_back(py::make_tuple(r.line, r.column, r.reason));
            return py::make_tuple(load.series, rejected);
        },
        py::arg("path"), "Returns (series, [(line, column, reason), ...]).");
    m.def("write_csv", &write_csv, py::arg("series"), py::arg("path"));
    m.def(
        "simple_returns", [](const PriceSeries& ps) { return simple_returns(ps).returns; }, py::arg("series"));
    m.def("index_series", &index_series, py::arg("series"));
    m.def(
        "synth_market",
        [](const py::object& params, std::uint64_t seed) {
            GbmParams p = app::config_from_json({{"synth", to_cpp(params)}}).synth;
            p.seed = seed;
            SyntheticMarket s = synth_market(p);
            return py::make_tuple(s.series, regime_names(s.regimes));
        },
        py::arg("params") = py::none(), py::arg("seed") = 0,
        "Two-regime GBM market; `params` takes the keys of the CLI `synth` section.");

    // Portfolio optimization

    py::class_<Moments>(m, "Moments")
        .def(py::init([](Vector mu, Matrix sigma) { return Moments{std::move(mu), std::move(sigma)}; }),
             py::arg("mu"), py::arg("sigma"))
        .def_readwrite("mu", &Moments::mu)
        .def_readwrite("sigma", &Moments::sigma);

    py::class_<AllocationConstraints>(m, "AllocationConstraints")
        .def(py::init([](double lower, double upper, double budget) {
                 return AllocationConstraints{lower, upper, budget};
             }),
             py::arg("lower") = 0.0, py::arg("upper") = 0.2, py::arg("budget") = 1.0)
        .def_readwrite("lower", &AllocationConstraints::lower)
        .def_readwrite("upper", &AllocationConstraints::upper)
        .def_readwrite("budget", &AllocationConstraints::budget)
        .def("satisfied_by", &AllocationConstraints::satisfied_by, py::arg("w"), py::arg("tol") = 1e-8);

    m.def(
        "estimate_moments", [](const Matrix& returns, int days) { return estimate_moments(returns, days); },
        py::arg("returns"), py::arg("days_per_year") = 252);
    m.def(
        "portfolio_stats",
        [](const Vector& w, const Moments& mo, double rf) {
            const PortfolioStats s = portfolio_stats_unchecked(w, mo, rf);
            return py::make_tuple(s.exp_return, s.volatility, s.sharpe);
        },
        py::arg("w"), py::arg("moments"), py::arg("rf") = 0.0, "Returns (return, volatility, sharpe).");
    m.def(
        "min_variance", [](const Moments& mo, const AllocationConstraints& c) { return min_variance(mo, c); },
        py::arg("moments"), py::arg("constraints"));
    m.def(
        "max_sharpe",
        [](const Moments& mo, double rf, const AllocationConstraints& c) { return max_sharpe(mo, rf, c); },
        py::arg("moments"), py::arg("rf"), py::arg("constraints"));
    m.def(
        "efficient_frontier",
        [](const Moments& mo, const AllocationConstraints& c, std::size_t n, double rf) {
            py::list out;
            for (const FrontierPoint& p : efficient_frontier(mo, c, n, rf)) {
                py::dict d;
                d["weights"] = p.weights;
                d["return"] = p.exp_return;
                d["volatility"] = p.volatility;
                d["sharpe"] = p.sharpe;
                d["is_mvp"] = p.is_mvp;
                d["is_max_sharpe"] = p.is_max_sharpe;
                out.append(d);
            }
            return out;
        },
        py::arg("moments"), py::arg("constraints"), py::arg("n_points"), py::arg("rf") = 0.0);

    // Agent

    py::class_<AgentNets>(m, "Agent")
        .def_property_readonly("feature_dim", &AgentNets::feature_dim)
        .def_property_readonly("action_dim", &AgentNets::action_dim)
        .def(py::self == py::self)
        .def("act",
             [](const AgentNets& nets, const Vector& features) { return select_action(nets, features).a; },
             py::arg("features"));

    m.def(
        "train",
        [](const PriceSeries& ps, const py::object& env, const py::object& agent, std::size_t episodes,
           std::uint64_t seed, const std::vector<double>& index) {
            const EnvConfig e = env_config_from_json(to_cpp(env));
            const AdaptiveConfig a = adaptive_config_from_json(to_cpp(agent));
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(ps, index, e, a, episodes, seed);
            }
            py::list log;
            for (const EpisodeLog& ep : r.log.episodes) {
                py::dict d;
                d["episode"] = ep.episode;
                d["total_reward"] = ep.total_reward;
                d["mean_abs_delta"] = ep.mean_abs_delta;
                d["frac_positive_delta"] = ep.frac_positive_delta;
                d["regime_frac_bull"] = ep.regime_frac_bull;
                log.append(d);
            }
            return py::make_tuple(r.nets, log);
        },
        py::arg("series"), py::arg("env") = py::none(), py::arg("agent") = py::none(), py::arg("episodes") = 20,
        py::arg("seed") = 0, py::arg("index") = std::vector<double>{},
        "Returns (agent, per-episode log). Configs are dicts with the keys of the CLI `env` and `agent` sections.");
    m.def(
        "rollout",
        [](const AgentNets& nets, const PriceSeries& ps, const py::object& env, std::size_t start) {
            const Rollout r = rollout(nets, ps, env_config_from_json(to_cpp(env)), start);
            Matrix weights(static_cast<Eigen::Index>(r.trace.size()), static_cast<Eigen::Index>(ps.assets()));
            for (std::size_t i = 0; i < r.trace.size(); ++i) weights.row(static_cast<Eigen::Index>(i)) = r.trace[i].w;
            return py::make_tuple(r.values, weights);
        },
        py::arg("agent"), py::arg("series"), py::arg("env") = py::none(), py::arg("start") = 0,
        "Greedy rollout; returns (values, weights per step).");
    m.def(
        "save_checkpoint",
        [](const std::filesystem::path& dir, const AgentNets& nets, const py::object& agent, const py::object& env) {
            save_checkpoint(dir, nets, adaptive_config_from_json(to_cpp(agent)), env_config_from_json(to_cpp(env)));
        },
        py::arg("dir"), py::arg("agent"), py::arg("agent_config") = py::none(), py::arg("env") = py::none());
    m.def(
        "load_checkpoint",
        [](const std::filesystem::path& dir) {
            Checkpoint c = load_checkpoint(dir);
            return py::make_tuple(c.nets, to_py(to_json(c.config)), to_py(to_json(c.env)));
        },
        py::arg("dir"), "Returns (agent, agent_config, env).");

    // Backtest

    m.def(
        "annualized_return",
        [](const std::vector<double>& v, int days) { return annualized_return(v, days); }, py::arg("values"),
        py::arg("days_per_year") = 252);
    m.def(
        "annualized_std", [](const std::vector<double>& v, int days) { return annualized_std(v, days); },
        py::arg("values"), py::arg("days_per_year") = 252);
    m.def(
        "sharpe_ratio",
        [](const std::vector<double>& v, double rf, int days) { return sharpe_ratio(v, rf, days); },
        py::arg("values"), py::arg("rf") = 0.0, py::arg("days_per_year") = 252);

    m.def(
        "backtest",
        [](const std::string& strategy, const PriceSeries& ps, std::size_t eval_begin, double initial_cash,
           const AllocationConstraints& c, std::size_t rebalance_every, std::size_t window, bool static_fit,
           double rf, const AgentNets* nets, std::size_t lookback) {
            Strategy s;
            if (strategy == "index") {
                s = BuyAndHoldIndex{};
            } else if (strategy == "min_variance") {
                s = MinVarianceStrategy{rebalance_every, window, c, static_fit};
            } else if (strategy == "mean_variance") {
                s = MeanVarianceStrategy{rebalance_every, window, c, static_fit, rf};
            } else if (strategy == "agent") {
                if (!nets) throw InvalidParams("strategy 'agent' needs an agent");
                RlAgentStrategy r;
                r.nets = *nets;
                r.lookback = lookback;
                s = r;
            } else {
                throw InvalidParams("unknown strategy '" + strategy + "'");
            }
            BacktestOptions opts;
            opts.initial_cash = initial_cash;
            opts.eval_begin = eval_begin;
            opts.rf = rf;
            return report_dict(run_backtest(s, ps, opts, 0, strategy));
        },
        py::arg("strategy"), py::arg("series"), py::arg("eval_begin") = 0, py::arg("initial_cash") = 10000.0,
        py::arg("constraints") = AllocationConstraints{0.0, 0.4, 1.0}, py::arg("rebalance_every") = 21,
        py::arg("estimation_window") = 252, py::arg("static_fit") = false, py::arg("rf") = 0.0,
        py::arg("agent") = nullptr, py::arg("lookback") = 10,
        "strategy is one of 'index', 'min_variance', 'mean_variance', 'agent'.");

    // Command-line entry points

    m.def(
        "run_command",
        [](const std::string& command, const py::object& config) {
            std::ostringstream out, err;
            int code = 0;
            try {
                const app::RunConfig c = app::config_from_json(to_cpp(config));
                code = app::run_command(command, c, out, err);
            } catch (const Error& e) {
                err << "config error: " << e.what() << '\n';
                code = app::kConfigError;
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("command"), py::arg("config") = py::none(),
        "Runs synth, train, backtest or frontier; returns (exit code, stdout, stderr).");
    m.def("default_config", [] { return to_py(app::to_json(app::default_config())); });
}
