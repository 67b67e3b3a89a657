#include "app.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "bullbear/errors.hpp"

namespace bullbear::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vector linspace(std::size_t d, double first, double last) {
    if (d == 1) return Vector::Constant(1, first);
    return Vector::LinSpaced(static_cast<Eigen::Index>(d), first, last);
}

GbmParams default_gbm(std::size_t d, std::size_t t) {
    GbmParams g;
    g.d = d;
    g.t = t;
    g.mu_bull = linspace(d, 0.05, 0.25);
    g.mu_bear = linspace(d, -0.05, -0.30);
    g.sigma_bull = linspace(d, 0.12, 0.28);
    g.sigma_bear = 1.5 * g.sigma_bull;
    g.corr = Matrix::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), 0.3);
    g.corr.diagonal().setOnes();
    g.regime_switch_prob = 1.0 / 126.0;
    return g;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
    throw ConfigError("config field '" + key + "': " + why);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& prefix = {}) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        bad(prefix + key, e.what());
    }
}

void read_path(const json& j, const char* key, fs::path& out, const std::string& prefix = {}) {
    std::string s;
    if (!j.contains(key)) return;
    read(j, key, s, prefix);
    out = s;
}

void read_date(const json& j, const char* key, std::optional<Date>& out, const std::string& prefix = {}) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    std::string s;
    read(j, key, s, prefix);
    auto d = Date::parse(s);
    if (!d) bad(prefix + key, "expected YYYY-MM-DD, got '" + s + "'");
    out = *d;
}

/// A scalar is broadcast to every asset.
void read_vector(const json& j, const char* key, Vector& out, std::size_t d, const std::string& prefix) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (v.is_number()) {
        out = Vector::Constant(static_cast<Eigen::Index>(d), v.get<double>());
        return;
    }
    std::vector<double> xs;
    read(j, key, xs, prefix);
    if (xs.size() != d) bad(prefix + key, "expected " + std::to_string(d) + " entries");
    out = Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

/// A scalar is a constant off-diagonal correlation.
void read_corr(const json& j, Matrix& out, std::size_t d) {
    if (!j.contains("corr")) return;
    const json& v = j.at("corr");
    const auto n = static_cast<Eigen::Index>(d);
    if (v.is_number()) {
        out = Matrix::Constant(n, n, v.get<double>());
        out.diagonal().setOnes();
        return;
    }
    std::vector<std::vector<double>> rows;
    read(j, "corr", rows, "synth.");
    if (rows.size() != d) bad("synth.corr", "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    out.resize(n, n);
    for (std::size_t i = 0; i < d; ++i) {
        if (rows[i].size() != d) bad("synth.corr", "ragged matrix");
        for (std::size_t k = 0; k < d; ++k)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json date_json(const std::optional<Date>& d) { return d ? json(d->to_string()) : json(nullptr); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ConfigError("unknown config field '" + (where.empty() ? k : where + "." + k) + "'");
    }
}

/// Rejects keys that `reference` (a serialized default) does not have.
void check_keys(const json& j, const std::string& where, const json& reference) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [k, _] : j.items()) {
        if (!reference.contains(k)) throw ConfigError("unknown config field '" + where + "." + k + "'");
    }
}

const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    return j.contains(key) ? j.at(key) : empty;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

PriceSeries load_prices(const RunConfig& c, std::ostream& out) {
    CsvLoad load = load_csv(c.prices_path());
    if (!load.rejected.empty())
        out << "warning: " << load.rejected.size() << " row(s) rejected in " << c.prices_path().string() << '\n';
    return std::move(load.series);
}

std::string slug(const std::string& name) {
    std::string s;
    for (char ch : name) {
        if (std::isalnum(static_cast<unsigned char>(ch))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        else if (!s.empty() && s.back() != '_') s += '_';
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

/// A checkpoint dir, or a parent of `seed_<n>` checkpoint dirs.
std::vector<std::pair<std::uint64_t, Checkpoint>> load_checkpoints(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("checkpoint directory not found: " + dir.string());
    std::vector<std::pair<std::uint64_t, Checkpoint>> out;
    if (fs::exists(dir / "config.json")) {
        out.emplace_back(0, load_checkpoint(dir));
        return out;
    }
    std::vector<std::pair<std::uint64_t, fs::path>> found;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (!e.is_directory() || name.rfind("seed_", 0) != 0) continue;
        std::uint64_t seed = 0;
        const char* first = name.data() + 5;
        const char* last = name.data() + name.size();
        auto [ptr, ec] = std::from_chars(first, last, seed);
        if (ec != std::errc{} || ptr != last) continue;
        found.emplace_back(seed, e.path());
    }
    if (found.empty()) throw ConfigError("no checkpoints under " + dir.string());
    std::sort(found.begin(), found.end());
    for (const auto& [seed, path] : found) out.emplace_back(seed, load_checkpoint(path));
    return out;
}

ComparisonEntry rl_entry(const std::string& name, const fs::path& dir, bool stochastic) {
    ComparisonEntry e;
    e.name = name;
    for (auto& [seed, ck] : load_checkpoints(dir)) {
        RlAgentStrategy s;
        s.nets = std::move(ck.nets);
        s.lookback = ck.env.lookback;
        s.stochastic = stochastic;
        s.noise_scale = ck.config.noise_scale;
        s.noise_theta = ck.config.noise_theta;
        e.runs.emplace_back(std::move(s));
        e.seeds.push_back(seed);
    }
    return e;
}

}  // namespace

std::vector<std::uint64_t> RunConfig::seeds() const {
    std::vector<std::uint64_t> s(n_seeds);
    for (std::size_t k = 0; k < n_seeds; ++k) s[k] = seed + k;
    return s;
}

fs::path RunConfig::prices_path() const { return prices.empty() ? out / "prices.csv" : prices; }
fs::path RunConfig::regimes_path() const { return regimes.empty() ? out / "regimes.csv" : regimes; }

void RunConfig::validate() const {
    try {
        if (n_seeds < 1) throw InvalidParams("n_seeds must be >= 1");
        if (out.empty()) throw InvalidParams("out must not be empty");
        synth.validate();
        env.validate();
        agent.validate();
        if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
            throw InvalidParams("split.train_fraction must lie in (0, 1)");
        if (split.train_start && split.train_end && *split.train_end < *split.train_start)
            throw InvalidParams("train range is empty");
        if (split.test_start && split.test_end && *split.test_end < *split.test_start)
            throw InvalidParams("test range is empty");
        if (split.train_end && split.test_start && !(*split.train_end < *split.test_start))
            throw InvalidParams("train range must end before the test range starts");
        if (!(constraints.lower <= constraints.upper)) throw InvalidParams("constraints.lower exceeds upper");
        if (backtest.rebalance_every < 1) throw InvalidParams("backtest.rebalance_every must be >= 1");
        if (backtest.estimation_window < 2) throw InvalidParams("backtest.estimation_window must be >= 2");
        if (frontier.n_points < 2) throw InvalidParams("frontier.n_points must be >= 2");
    } catch (const InvalidParams& e) {
        throw ConfigError(e.what());
    }
}

RunConfig default_config() {
    RunConfig c;
    c.synth = default_gbm(5, 1500);
    return c;
}

RunConfig config_from_json(const json& j, RunConfig c) {
    check_keys(j, "", {"seed", "n_seeds", "out", "prices", "regimes", "synth", "split", "env", "agent", "constraints",
                       "train", "backtest", "frontier"});
    read(j, "seed", c.seed);
    read(j, "n_seeds", c.n_seeds);
    read_path(j, "out", c.out);
    read_path(j, "prices", c.prices);
    read_path(j, "regimes", c.regimes);

    const json& s = section(j, "synth");
    check_keys(s, "synth", {"d", "t", "p0", "mu_bull", "mu_bear", "sigma_bull", "sigma_bear", "corr",
                            "regime_switch_prob", "initial_regime", "days_per_year", "start_date"});
    std::size_t d = c.synth.d;
    std::size_t t = c.synth.t;
    read(s, "d", d, "synth.");
    read(s, "t", t, "synth.");
    if (d != c.synth.d) {
        c.synth = default_gbm(d, t);
    }
    c.synth.t = t;
    read_vector(s, "p0", c.synth.p0, d, "synth.");
    read_vector(s, "mu_bull", c.synth.mu_bull, d, "synth.");
    read_vector(s, "mu_bear", c.synth.mu_bear, d, "synth.");
    read_vector(s, "sigma_bull", c.synth.sigma_bull, d, "synth.");
    read_vector(s, "sigma_bear", c.synth.sigma_bear, d, "synth.");
    read_corr(s, c.synth.corr, d);
    read(s, "regime_switch_prob", c.synth.regime_switch_prob, "synth.");
    read(s, "days_per_year", c.synth.days_per_year, "synth.");
    if (s.contains("initial_regime")) {
        std::string r;
        read(s, "initial_regime", r, "synth.");
        if (r == "bull") c.synth.initial_regime = Regime::Bull;
        else if (r == "bear") c.synth.initial_regime = Regime::Bear;
        else bad("synth.initial_regime", "expected 'bull' or 'bear'");
    }
    std::optional<Date> start = c.synth.start_date;
    read_date(s, "start_date", start, "synth.");
    if (start) c.synth.start_date = *start;

    const json& sp = section(j, "split");
    check_keys(sp, "split", {"train_start", "train_end", "test_start", "test_end", "train_fraction"});
    read_date(sp, "train_start", c.split.train_start, "split.");
    read_date(sp, "train_end", c.split.train_end, "split.");
    read_date(sp, "test_start", c.split.test_start, "split.");
    read_date(sp, "test_end", c.split.test_end, "split.");
    read(sp, "train_fraction", c.split.train_fraction, "split.");

    check_keys(section(j, "env"), "env", to_json(EnvConfig{}));
    check_keys(section(j, "agent"), "agent", to_json(AdaptiveConfig{}));
    c.env = env_config_from_json(section(j, "env"), c.env);
    c.agent = adaptive_config_from_json(section(j, "agent"), c.agent);

    const json& cs = section(j, "constraints");
    check_keys(cs, "constraints", {"lower", "upper", "budget"});
    read(cs, "lower", c.constraints.lower, "constraints.");
    read(cs, "upper", c.constraints.upper, "constraints.");
    read(cs, "budget", c.constraints.budget, "constraints.");

    const json& tr = section(j, "train");
    check_keys(tr, "train", {"episodes", "vanilla"});
    read(tr, "episodes", c.train.episodes, "train.");
    read(tr, "vanilla", c.train.vanilla, "train.");

    const json& bt = section(j, "backtest");
    check_keys(bt, "backtest", {"checkpoint", "vanilla_checkpoint", "baselines_only", "rebalance_every",
                                "estimation_window", "static_fit", "stochastic", "rf"});
    read_path(bt, "checkpoint", c.backtest.checkpoint, "backtest.");
    read_path(bt, "vanilla_checkpoint", c.backtest.vanilla_checkpoint, "backtest.");
    read(bt, "baselines_only", c.backtest.baselines_only, "backtest.");
    read(bt, "rebalance_every", c.backtest.rebalance_every, "backtest.");
    read(bt, "estimation_window", c.backtest.estimation_window, "backtest.");
    read(bt, "static_fit", c.backtest.static_fit, "backtest.");
    read(bt, "stochastic", c.backtest.stochastic, "backtest.");
    read(bt, "rf", c.backtest.rf, "backtest.");

    const json& fr = section(j, "frontier");
    check_keys(fr, "frontier", {"n_points", "rf", "start", "end"});
    read(fr, "n_points", c.frontier.n_points, "frontier.");
    read(fr, "rf", c.frontier.rf, "frontier.");
    read_date(fr, "start", c.frontier.start, "frontier.");
    read_date(fr, "end", c.frontier.end, "frontier.");
    return c;
}

json to_json(const RunConfig& c) {
    json corr = json::array();
    for (Eigen::Index i = 0; i < c.synth.corr.rows(); ++i) corr.push_back(vector_json(c.synth.corr.row(i).transpose()));
    json synth{{"d", c.synth.d},
               {"t", c.synth.t},
               {"mu_bull", vector_json(c.synth.mu_bull)},
               {"mu_bear", vector_json(c.synth.mu_bear)},
               {"sigma_bull", vector_json(c.synth.sigma_bull)},
               {"sigma_bear", vector_json(c.synth.sigma_bear)},
               {"corr", corr},
               {"regime_switch_prob", c.synth.regime_switch_prob},
               {"initial_regime", to_string(c.synth.initial_regime)},
               {"days_per_year", c.synth.days_per_year},
               {"start_date", c.synth.start_date.to_string()}};
    if (c.synth.p0.size() > 0) synth["p0"] = vector_json(c.synth.p0);
    return {{"seed", c.seed},
            {"n_seeds", c.n_seeds},
            {"out", c.out.string()},
            {"prices", c.prices_path().string()},
            {"regimes", c.regimes_path().string()},
            {"synth", synth},
            {"split",
             {{"train_start", date_json(c.split.train_start)},
              {"train_end", date_json(c.split.train_end)},
              {"test_start", date_json(c.split.test_start)},
              {"test_end", date_json(c.split.test_end)},
              {"train_fraction", c.split.train_fraction}}},
            {"env", to_json(c.env)},
            {"agent", to_json(c.agent)},
            {"constraints",
             {{"lower", c.constraints.lower}, {"upper", c.constraints.upper}, {"budget", c.constraints.budget}}},
            {"train", {{"episodes", c.train.episodes}, {"vanilla", c.train.vanilla}}},
            {"backtest",
             {{"checkpoint", c.backtest.checkpoint.string()},
              {"vanilla_checkpoint", c.backtest.vanilla_checkpoint.string()},
              {"baselines_only", c.backtest.baselines_only},
              {"rebalance_every", c.backtest.rebalance_every},
              {"estimation_window", c.backtest.estimation_window},
              {"static_fit", c.backtest.static_fit},
              {"stochastic", c.backtest.stochastic},
              {"rf", c.backtest.rf}}},
            {"frontier",
             {{"n_points", c.frontier.n_points},
              {"rf", c.frontier.rf},
              {"start", date_json(c.frontier.start)},
              {"end", date_json(c.frontier.end)}}}};
}

RunConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

Split resolve_split(const SplitConfig& s, const PriceSeries& ps) {
    const std::size_t n = ps.days();
    const Date first = ps.dates.front();
    const Date last = ps.dates.back();
    // Index one past the last row dated on or before d.
    auto end_of = [&](Date d) { return std::upper_bound(ps.dates.begin(), ps.dates.end(), d) - ps.dates.begin(); };

    Split out;
    if (s.train_start && last < *s.train_start) throw InsufficientData("train range starts after the data ends");
    if (s.train_end && *s.train_end < first) throw InsufficientData("train range ends before the data starts");
    out.train_begin = s.train_start ? ps.lower_bound(*s.train_start) : 0;
    out.train_end = s.train_end ? static_cast<std::size_t>(end_of(*s.train_end))
                                : static_cast<std::size_t>(s.train_fraction * static_cast<double>(n));
    out.test_begin = s.test_start ? ps.lower_bound(*s.test_start) : out.train_end;
    out.test_end = s.test_end ? static_cast<std::size_t>(end_of(*s.test_end)) : n;
    if (out.train_end < out.train_begin + 2) throw InsufficientData("train range holds fewer than 2 days");
    if (out.test_begin < out.train_end) throw ConfigError("train and test ranges overlap");
    return out;
}

void cmd_synth(const RunConfig& c, std::ostream& out) {
    c.validate();
    GbmParams p = c.synth;
    p.seed = c.seed;
    SyntheticMarket m = synth_market(p);
    ensure_dir(c.out);
    if (c.prices_path().has_parent_path()) ensure_dir(c.prices_path().parent_path());
    if (c.regimes_path().has_parent_path()) ensure_dir(c.regimes_path().parent_path());
    write_csv(m.series, c.prices_path());
    write_regime_csv(m.series.dates, m.regimes, c.regimes_path());
    write_json(to_json(c), c.out / "synth_config.json");
    const auto bull = std::count(m.regimes.begin(), m.regimes.end(), Regime::Bull);
    out << "synth: D=" << m.series.assets() << " T=" << m.series.days() << " bull_fraction=" << std::fixed
        << std::setprecision(3) << static_cast<double>(bull) / static_cast<double>(m.regimes.size())
        << std::defaultfloat << " -> " << c.prices_path().string() << ", " << c.regimes_path().string() << '\n';
}

void cmd_train(const RunConfig& c, std::ostream& out) {
    c.validate();
    const PriceSeries all = load_prices(c, out);
    const Split sp = resolve_split(c.split, all);
    const PriceSeries train_ps = all.slice(sp.train_begin, sp.train_end);

    AdaptiveConfig cfg = c.agent;
    cfg.vanilla = c.train.vanilla;
    const fs::path dir = c.out / "checkpoints" / (cfg.vanilla ? "vanilla" : "adaptive");
    ensure_dir(dir);
    write_json(to_json(c), dir / "run_config.json");

    json audit{{"train_begin", train_ps.dates.front().to_string()},
               {"train_end", train_ps.dates.back().to_string()},
               {"train_rows", train_ps.days()},
               {"seeds", json::array()}};
    out << "train: " << (cfg.vanilla ? "DDPG" : "Adaptive DDPG") << " on " << train_ps.dates.front().to_string()
        << " .. " << train_ps.dates.back().to_string() << " (" << train_ps.days() << " days), " << c.train.episodes
        << " episode(s)\n";
    for (std::uint64_t seed : c.seeds()) {
        Trainer trainer(train_ps, {}, c.env, cfg, seed);
        const TrainingLog& log = trainer.run(c.train.episodes);
        if (c.train.episodes > 0 && log.last_index_seen >= train_ps.days())
            throw Error("data audit failed: training read past the train range");
        const fs::path ck = dir / ("seed_" + std::to_string(seed));
        save_checkpoint(ck, trainer.nets(), cfg, c.env);
        write_training_log_csv(log, ck / "training_log.csv");
        audit["seeds"].push_back(
            {{"seed", seed},
             {"last_index_seen", log.last_index_seen},
             {"last_date_seen", train_ps.dates[std::min(log.last_index_seen, train_ps.days() - 1)].to_string()}});
        out << "  seed " << seed;
        if (!log.episodes.empty()) out << ": final episode reward " << log.episodes.back().total_reward;
        out << " -> " << ck.string() << '\n';
    }
    write_json(audit, dir / "data_audit.json");
}

void cmd_backtest(const RunConfig& c, std::ostream& out) {
    c.validate();
    std::vector<ComparisonEntry> entries;
    if (!c.backtest.baselines_only) {
        const fs::path adaptive = c.backtest.checkpoint.empty() ? c.out / "checkpoints" / "adaptive" : c.backtest.checkpoint;
        entries.push_back(rl_entry("Adaptive DDPG", adaptive, c.backtest.stochastic));
        fs::path vanilla = c.backtest.vanilla_checkpoint;
        if (vanilla.empty() && fs::is_directory(c.out / "checkpoints" / "vanilla")) vanilla = c.out / "checkpoints" / "vanilla";
        if (!vanilla.empty()) entries.push_back(rl_entry("DDPG", vanilla, c.backtest.stochastic));
    }

    const PriceSeries all = load_prices(c, out);
    const Split sp = resolve_split(c.split, all);
    if (sp.test_end < sp.test_begin + 2) throw InsufficientData("test range holds fewer than 2 days");
    const PriceSeries ps = all.slice(0, sp.test_end);

    entries.push_back({"Index", {BuyAndHoldIndex{}}, {c.seed}});
    MinVarianceStrategy minvar{c.backtest.rebalance_every, c.backtest.estimation_window, c.constraints,
                               c.backtest.static_fit};
    entries.push_back({"Min-variance", {minvar}, {c.seed}});
    MeanVarianceStrategy meanvar{c.backtest.rebalance_every, c.backtest.estimation_window, c.constraints,
                                 c.backtest.static_fit, c.backtest.rf};
    entries.push_back({"Mean-variance", {meanvar}, {c.seed}});

    BacktestOptions opts;
    opts.initial_cash = c.env.initial_cash;
    opts.cost_rate = c.env.cost_rate;
    opts.eval_begin = sp.test_begin;
    opts.rf = c.backtest.rf;
    const auto rows = compare(entries, ps, opts);

    const fs::path dir = c.out / "backtest";
    ensure_dir(dir);
    write_summary_csv(rows, dir / "summary.csv");
    json report{{"config", to_json(c)},
                {"test_begin", ps.dates[sp.test_begin].to_string()},
                {"test_end", ps.dates.back().to_string()},
                {"strategies", json::array()}};
    for (const auto& row : rows) {
        json r = to_json(row, false);
        for (std::size_t k = 0; k < row.runs.size(); ++k) {
            std::string file = "equity_" + slug(row.name);
            if (row.name.find("DDPG") != std::string::npos) file += "_seed" + std::to_string(row.runs[k].seed);
            file += ".csv";
            write_equity_csv(row.runs[k].curve, dir / file);
            r["runs"][k]["equity_csv"] = file;
        }
        report["strategies"].push_back(std::move(r));
    }
    write_json(report, dir / "report.json");

    out << "backtest: " << ps.dates[sp.test_begin].to_string() << " .. " << ps.dates.back().to_string() << '\n';
    out << std::left << std::setw(16) << "strategy" << std::right << std::setw(12) << "initial" << std::setw(12)
        << "final" << std::setw(12) << "ann_return" << std::setw(10) << "ann_std" << std::setw(10) << "sharpe" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(16) << r.name << std::right << std::fixed << std::setprecision(2)
            << std::setw(12) << r.initial_value << std::setw(12) << r.final_value << std::setw(11)
            << 100.0 * r.annualized_return << '%' << std::setw(9) << 100.0 * r.annualized_std << '%'
            << std::setw(10) << r.sharpe_ratio << std::defaultfloat << '\n';
    }
    out << "  -> " << (dir / "summary.csv").string() << '\n';
}

void cmd_frontier(const RunConfig& c, std::ostream& out) {
    c.validate();
    const PriceSeries all = load_prices(c, out);
    std::size_t begin = 0;
    std::size_t end = all.days();
    if (c.frontier.start || c.frontier.end) {
        if (c.frontier.start) begin = all.lower_bound(*c.frontier.start);
        if (c.frontier.end)
            end = static_cast<std::size_t>(std::upper_bound(all.dates.begin(), all.dates.end(), *c.frontier.end) -
                                           all.dates.begin());
    } else {
        const Split sp = resolve_split(c.split, all);
        begin = sp.train_begin;
        end = sp.train_end;
    }
    if (end < begin + 3) throw InsufficientData("frontier range needs at least 2 daily returns");
    const PriceSeries ps = all.slice(begin, end);
    const Moments m = estimate_moments(simple_returns(ps));

    auto points = efficient_frontier(m, c.constraints, c.frontier.n_points, c.frontier.rf);
    try {
        const Vector w = max_sharpe(m, c.frontier.rf, c.constraints);
        const auto s = portfolio_stats(w, m, c.frontier.rf);
        FrontierPoint best{w, s.exp_return, s.volatility, s.sharpe, false, true};
        auto at = std::upper_bound(points.begin(), points.end(), best.exp_return,
                                   [](double r, const FrontierPoint& p) { return r < p.exp_return; });
        points.insert(at, std::move(best));
    } catch (const Degenerate&) {
        out << "warning: every feasible portfolio is riskless; no max-Sharpe row\n";
    }
    ensure_dir(c.out);
    write_frontier_csv(points, c.out / "frontier.csv");
    write_json(to_json(c), c.out / "frontier_config.json");
    out << "frontier: " << ps.dates.front().to_string() << " .. " << ps.dates.back().to_string() << ", "
        << c.frontier.n_points << " point(s) + max-Sharpe -> " << (c.out / "frontier.csv").string() << '\n';
}

int run_command(const std::string& command, const RunConfig& c, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, void (*)(const RunConfig&, std::ostream&)> commands{
        {"synth", cmd_synth}, {"train", cmd_train}, {"backtest", cmd_backtest}, {"frontier", cmd_frontier}};
    auto it = commands.find(command);
    if (it == commands.end()) {
        err << "error: unknown command '" << command << "'\n";
        return kConfigError;
    }
    try {
        it->second(c, out);
        return kOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const Infeasible& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InvalidParams& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace bullbear::app
