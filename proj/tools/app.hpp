// Command implementations behind the bullbear executable.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/agent.hpp"
#include "bullbear/backtest.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/portfolio_opt.hpp"

namespace bullbear::app {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

struct SplitConfig {
    std::optional<Date> train_start;
    std::optional<Date> train_end;
    std::optional<Date> test_start;
    std::optional<Date> test_end;
    double train_fraction = 0.73;  // used when train_end is not set
};

struct TrainSettings {
    std::size_t episodes = 20;
    bool vanilla = false;
};

struct BacktestSettings {
    std::filesystem::path checkpoint;          // empty -> <out>/checkpoints/adaptive
    std::filesystem::path vanilla_checkpoint;  // empty -> <out>/checkpoints/vanilla if present
    bool baselines_only = false;
    std::size_t rebalance_every = 21;
    std::size_t estimation_window = 252;
    bool static_fit = false;
    bool stochastic = false;
    double rf = 0.0;
};

struct FrontierSettings {
    std::size_t n_points = 20;
    double rf = 0.0;
    std::optional<Date> start;  // default: the train range
    std::optional<Date> end;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t n_seeds = 5;
    std::filesystem::path out = "out";
    std::filesystem::path prices;   // empty -> <out>/prices.csv
    std::filesystem::path regimes;  // empty -> <out>/regimes.csv
    GbmParams synth;
    SplitConfig split;
    EnvConfig env;
    AdaptiveConfig agent;
    AllocationConstraints constraints{0.0, 0.4, 1.0};
    TrainSettings train;
    BacktestSettings backtest;
    FrontierSettings frontier;

    /// seed, seed + 1, ..., seed + n_seeds - 1
    std::vector<std::uint64_t> seeds() const;
    std::filesystem::path prices_path() const;
    std::filesystem::path regimes_path() const;
    void validate() const;
};

/// Five-asset two-regime market with heterogeneous drifts.
RunConfig default_config();
/// Overlays the fields present in `j` onto `base`. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = default_config());
nlohmann::json to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

/// Row ranges [begin, end) of the train and test slices.
struct Split {
    std::size_t train_begin = 0;
    std::size_t train_end = 0;
    std::size_t test_begin = 0;
    std::size_t test_end = 0;
};
Split resolve_split(const SplitConfig& s, const PriceSeries& ps);

void cmd_synth(const RunConfig& c, std::ostream& out);
void cmd_train(const RunConfig& c, std::ostream& out);
void cmd_backtest(const RunConfig& c, std::ostream& out);
void cmd_frontier(const RunConfig& c, std::ostream& out);

/// Runs `command` and maps exceptions onto the exit-code contract, printing
/// the message to `err`.
int run_command(const std::string& command, const RunConfig& c, std::ostream& out, std::ostream& err);

}  // namespace bullbear::app
