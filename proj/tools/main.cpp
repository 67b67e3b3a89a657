#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "app.hpp"
#include "bullbear/errors.hpp"

int main(int argc, char** argv) {
    using namespace bullbear::app;

    CLI::App cli{"bullbear: regime-aware actor-critic portfolio allocation"};
    cli.require_subcommand(1);
    cli.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> n_seeds;
    cli.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cli.add_option("--seed", seed, "Master seed (RL runs use seed .. seed + n_seeds - 1)");
    cli.add_option("--out", out, "Output directory");
    cli.add_option("--n-seeds", n_seeds, "Number of RL seeds");

    std::optional<std::string> prices;
    auto* synth = cli.add_subcommand("synth", "Write a synthetic regime-switching market");
    std::optional<std::size_t> days, assets;
    synth->add_option("--days", days, "Trading days");
    synth->add_option("--assets", assets, "Asset count");
    auto* train = cli.add_subcommand("train", "Train agents on the train range");
    std::optional<std::size_t> episodes;
    bool vanilla = false;
    train->add_option("--episodes", episodes, "Training episodes per seed");
    train->add_flag("--vanilla", vanilla, "Train plain DDPG instead of the adaptive agent");
    auto* backtest = cli.add_subcommand("backtest", "Compare strategies on the test range");
    std::optional<std::string> checkpoint, vanilla_checkpoint;
    bool baselines_only = false;
    backtest->add_option("--checkpoint", checkpoint, "Adaptive agent checkpoint directory");
    backtest->add_option("--vanilla-checkpoint", vanilla_checkpoint, "DDPG checkpoint directory");
    backtest->add_flag("--baselines-only", baselines_only, "Index, min-variance and mean-variance only");
    auto* frontier = cli.add_subcommand("frontier", "Efficient frontier over a date range");
    std::optional<std::size_t> n_points;
    frontier->add_option("--n-points", n_points, "Frontier points");
    for (auto* sub : {train, backtest, frontier}) sub->add_option("--prices", prices, "Price CSV");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    RunConfig c;
    try {
        c = config_path.empty() ? default_config() : load_config(config_path);
    } catch (const bullbear::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (n_seeds) c.n_seeds = *n_seeds;
    if (prices) c.prices = *prices;
    if (days) c.synth.t = *days;
    if (assets) {
        nlohmann::json j{{"synth", {{"d", *assets}, {"t", c.synth.t}}}};
        c = config_from_json(j, c);
    }
    if (episodes) c.train.episodes = *episodes;
    if (vanilla) c.train.vanilla = true;
    if (checkpoint) c.backtest.checkpoint = *checkpoint;
    if (vanilla_checkpoint) c.backtest.vanilla_checkpoint = *vanilla_checkpoint;
    if (baselines_only) c.backtest.baselines_only = true;
    if (n_points) c.frontier.n_points = *n_points;

    const std::string command = cli.get_subcommands().front()->get_name();
    return run_command(command, c, std::cout, std::cerr);
}
