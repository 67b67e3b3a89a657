/**
 * @file agent.hpp
 * @brief Actor-critic learner with sign-asymmetric critic updates.
 *
 * The critic loss weights every sample's squared TD error by alpha_plus or
 * alpha_minus depending on the sign of its prediction error. Which of the
 * two rates applies to good news, and which exploration noise is used,
 * follows the bull/bear regime read off a market index:
 *
 *   bull: (alpha_plus, alpha_minus) as configured, Gaussian OU noise
 *   bear: rates swapped, noise restricted to non-positive values
 *
 * With alpha_plus == alpha_minus and regime coupling off the learner is
 * plain DDPG, bit for bit.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/neural.hpp"
#include "bullbear/trading_env.hpp"

namespace bullbear {

enum class DeltaMode {
    Bootstrapped,  // delta = r + gamma Q'(s', mu'(s')) - Q(s, a)
    Reward,        // delta = r - Q(s, a)
};

struct AdaptiveConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double alpha_plus = 1.0;
    double alpha_minus = 0.0;
    double beta = 1.0;
    std::size_t batch_size = 64;
    std::size_t buffer_capacity = 100000;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double noise_scale = 0.2;           // stationary std of the exploration noise
    double noise_theta = 0.15;          // mean reversion per step
    double noise_final_fraction = 0.2;  // linear decay target over training
    std::size_t regime_window = 50;
    bool regime_coupling = true;
    bool vanilla = false;  // unweighted critic loss and Gaussian noise throughout
    DeltaMode delta_mode = DeltaMode::Bootstrapped;
    std::vector<std::size_t> actor_hidden{64, 32};
    std::vector<std::size_t> critic_hidden{64, 32};
    double reward_scale = 0.0;  // 0 -> 100 / initial cash

    void validate() const;
};

nlohmann::json to_json(const AdaptiveConfig& c);
AdaptiveConfig adaptive_config_from_json(const nlohmann::json& j, AdaptiveConfig base = {});
nlohmann::json to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig base = {});

/// Stream-specific seed derived from a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class NoiseKind { Positive, Negative };

/// Per-dimension Ornstein-Uhlenbeck process. The Negative kind emits -|x|.
class NoiseProcess {
public:
    NoiseProcess(NoiseKind kind, std::size_t dims, double scale, double theta, std::uint64_t seed);

    Vector sample();
    void reset();
    void set_scale(double scale) { scale_ = scale; }
    double scale() const { return scale_; }
    NoiseKind kind() const { return kind_; }

private:
    NoiseKind kind_;
    double scale_;
    double theta_;
    Vector state_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Transition {
    Vector state;  // features
    Vector action;
    double reward = 0.0;
    Vector next_state;
    bool done = false;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    /// `n` draws uniformly with replacement. Throws InsufficientSamples if
    /// fewer than `n` transitions are stored.
    std::vector<Transition> sample(std::size_t n, std::mt19937_64& rng) const;

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }
    /// i-th oldest stored transition.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t head_ = 0;  // oldest element once full
    std::uint64_t inserted_ = 0;
};

struct AgentNets {
    Mlp actor;
    Mlp critic;
    Mlp target_actor;
    Mlp target_critic;

    static AgentNets create(std::size_t feature_dim, std::size_t action_dim, const AdaptiveConfig& cfg,
                            std::uint64_t seed);
    std::size_t feature_dim() const { return actor.input_size(); }
    std::size_t action_dim() const { return actor.output_size(); }

    void save(const std::filesystem::path& dir) const;
    static AgentNets load(const std::filesystem::path& dir);

    friend bool operator==(const AgentNets&, const AgentNets&) = default;
};

/// Column-stacked view of a transition batch.
struct Batch {
    Matrix states;
    Matrix actions;
    Vector rewards;
    Matrix next_states;
    std::vector<bool> done;

    static Batch from(const std::vector<Transition>& transitions);
    std::size_t size() const { return static_cast<std::size_t>(rewards.size()); }
};

/// clip(actor(features) + noise, -1, 1); deterministic without noise.
TradeAction select_action(const AgentNets& nets, const Vector& features, NoiseProcess* noise = nullptr);

double discounted_return(std::span<const double> rewards, double gamma);

/// y_i = r_i + gamma Q'(s'_i, mu'(s'_i)), or r_i for terminal transitions.
Vector td_target(const AgentNets& nets, const Batch& batch, double gamma);
Vector td_target(const AgentNets& nets, const std::vector<Transition>& batch, double gamma);

double prediction_error(const AgentNets& nets, const Transition& t, double gamma,
                        DeltaMode mode = DeltaMode::Bootstrapped);

/// (rate for positive errors, rate for negative errors) in force for a regime.
std::pair<double, double> active_rates(const AdaptiveConfig& cfg, Regime regime);

/// Per-sample loss weight for a prediction error.
double sample_weight(double delta, double rate_positive, double rate_negative);

struct CriticGradient {
    double loss = 0.0;
    Vector deltas;
    Vector weights;
    Gradients grads;
};

/// L = (1/N) sum c_i (y_i - Q(s_i, a_i))^2 and its exact gradient.
CriticGradient critic_loss_gradient(const AgentNets& nets, const Batch& batch, const AdaptiveConfig& cfg,
                                    Regime regime);

struct CriticStepStats {
    double loss = 0.0;
    double mean_abs_delta = 0.0;
    double frac_positive = 0.0;
    bool updated = false;
};

/// One optimizer step on the weighted loss. A batch whose weights are all
/// zero leaves both the critic and the optimizer untouched.
CriticStepStats adaptive_critic_step(AgentNets& nets, Adam& opt, const Batch& batch, const AdaptiveConfig& cfg,
                                     Regime regime);

/// Reference DDPG critic step: L = (1/N) sum (y_i - Q(s_i, a_i))^2.
CriticStepStats vanilla_critic_step(AgentNets& nets, Adam& opt, const Batch& batch, double gamma);

/// Q values (1 x N) for a batch of states and actions, with dQ/da (D x N).
using ActionValueFn = std::function<Matrix(const Matrix& states, const Matrix& actions, Matrix* dq_da)>;

ActionValueFn critic_action_value(const Mlp& critic);

/// J = (1/N) sum Q(s_i, actor(s_i)); fills `grads` with dJ/dtheta.
double actor_objective_gradient(const Mlp& actor, const Matrix& states, const ActionValueFn& q, Gradients* grads);

/// One ascent step on J, critic frozen. Returns J before the step.
double actor_step(Mlp& actor, Adam& opt, const Matrix& states, const ActionValueFn& q);
double actor_step(AgentNets& nets, Adam& opt, const Batch& batch);

void soft_update(AgentNets& nets, double tau);

/// exp(beta q_i) / sum_j exp(beta q_j), max-shifted.
Vector softmax_policy(const Vector& q_values, double beta);

/// Mean critic value of (buy, hold, sell) candidate actions at a state:
/// buy draws every leg from (0, 1], sell from [-1, 0), hold is zero.
Vector decision_utilities(const AgentNets& nets, const Vector& features, std::size_t candidates, std::uint64_t seed);

struct EpisodeLog {
    std::size_t episode = 0;
    double total_reward = 0.0;
    double mean_abs_delta = 0.0;
    double frac_positive_delta = 0.0;
    double regime_frac_bull = 0.0;

    friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

struct TrainingLog {
    std::vector<EpisodeLog> episodes;
    std::size_t last_index_seen = 0;  // highest price row read
};

/// `episode,total_reward,mean_abs_delta,frac_positive_delta,regime_frac_bull`
void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path);

/// Owns the whole learning state: networks, optimizers, buffer, noise, RNG.
class Trainer {
public:
    /// `index` may be empty, in which case the price-weighted index of `data` is used.
    Trainer(PriceSeries data, std::vector<double> index, EnvConfig env, AdaptiveConfig cfg, std::uint64_t seed);

    /// Starts episode `episode` of `total`; sets the noise decay.
    void begin_episode(std::size_t episode, std::size_t total);
    /// One environment step plus, once the buffer holds a batch, one critic
    /// step, one actor step and a soft update. Returns false at episode end.
    bool step();
    EpisodeLog end_episode();

    TrainingLog run(std::size_t episodes);

    const AgentNets& nets() const { return nets_; }
    const Adam& critic_optimizer() const { return critic_opt_; }
    const Adam& actor_optimizer() const { return actor_opt_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const EnvState& state() const { return state_; }
    const TrainingLog& log() const { return log_; }
    double reward_scale() const { return reward_scale_; }

private:
    PriceSeries data_;
    std::vector<double> index_;
    EnvConfig env_;
    AdaptiveConfig cfg_;
    double reward_scale_;
    AgentNets nets_;
    Adam critic_opt_;
    Adam actor_opt_;
    ReplayBuffer buffer_;
    NoiseProcess noise_plus_;
    NoiseProcess noise_minus_;
    std::mt19937_64 sample_rng_;
    std::mt19937_64 start_rng_;
    TrainingLog log_;

    EnvState state_;
    std::size_t episode_ = 0;
    std::size_t end_t_ = 0;
    bool active_ = false;
    double ep_reward_ = 0.0;
    double ep_abs_delta_ = 0.0;
    double ep_positive_ = 0.0;
    std::size_t ep_delta_count_ = 0;
    std::size_t ep_updates_ = 0;
    std::size_t ep_steps_ = 0;
    std::size_t ep_bull_ = 0;
};

struct TrainResult {
    AgentNets nets;
    TrainingLog log;
};

TrainResult train(const PriceSeries& data, const std::vector<double>& index, const EnvConfig& env,
                  const AdaptiveConfig& cfg, std::size_t episodes, std::uint64_t seed);

/// Greedy (or noisy, if `noise` is given) rollout over [start, end of data].
struct Rollout {
    std::vector<double> values;  // portfolio value per day, first = initial cash
    std::vector<TraceRow> trace;
};
Rollout rollout(const AgentNets& nets, const PriceSeries& data, const EnvConfig& env, std::size_t start = 0,
                NoiseProcess* noise = nullptr);

/// Checkpoint directory: the four networks plus `config.json`.
void save_checkpoint(const std::filesystem::path& dir, const AgentNets& nets, const AdaptiveConfig& cfg,
                     const EnvConfig& env);
struct Checkpoint {
    AgentNets nets;
    AdaptiveConfig config;
    EnvConfig env;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace bullbear
