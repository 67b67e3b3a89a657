#include "bullbear/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "bullbear/errors.hpp"

namespace bullbear {

void AdaptiveConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidParams("gamma must lie in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw InvalidParams("tau must lie in (0, 1]");
    if (!(alpha_plus >= 0.0) || !(alpha_minus >= 0.0)) throw InvalidParams("alpha rates must be >= 0");
    if (!(beta >= 0.0)) throw InvalidParams("beta must be >= 0");
    if (batch_size < 1) throw InvalidParams("batch size must be >= 1");
    if (buffer_capacity < batch_size) throw InvalidParams("buffer capacity must be at least the batch size");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw InvalidParams("learning rates must be positive");
    if (!(noise_scale >= 0.0)) throw InvalidParams("noise scale must be >= 0");
    if (!(noise_theta > 0.0 && noise_theta <= 1.0)) throw InvalidParams("noise theta must lie in (0, 1]");
    if (!(noise_final_fraction >= 0.0 && noise_final_fraction <= 1.0))
        throw InvalidParams("noise final fraction must lie in [0, 1]");
    if (regime_window < 1) throw InvalidParams("regime window must be >= 1");
    if (!(reward_scale >= 0.0)) throw InvalidParams("reward scale must be >= 0");
    for (auto h : actor_hidden)
        if (h == 0) throw InvalidParams("hidden layer sizes must be >= 1");
    for (auto h : critic_hidden)
        if (h == 0) throw InvalidParams("hidden layer sizes must be >= 1");
}

namespace {

const char* to_string(DeltaMode m) { return m == DeltaMode::Bootstrapped ? "bootstrapped" : "reward"; }

DeltaMode delta_mode_from_string(const std::string& s) {
    if (s == "bootstrapped") return DeltaMode::Bootstrapped;
    if (s == "reward") return DeltaMode::Reward;
    throw ConfigError("delta_mode must be 'bootstrapped' or 'reward', got '" + s + "'");
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

nlohmann::json to_json(const AdaptiveConfig& c) {
    return {{"gamma", c.gamma},
            {"tau", c.tau},
            {"alpha_plus", c.alpha_plus},
            {"alpha_minus", c.alpha_minus},
            {"beta", c.beta},
            {"batch_size", c.batch_size},
            {"buffer_capacity", c.buffer_capacity},
            {"actor_lr", c.actor_lr},
            {"critic_lr", c.critic_lr},
            {"noise_scale", c.noise_scale},
            {"noise_theta", c.noise_theta},
            {"noise_final_fraction", c.noise_final_fraction},
            {"regime_window", c.regime_window},
            {"regime_coupling", c.regime_coupling},
            {"vanilla", c.vanilla},
            {"delta_mode", to_string(c.delta_mode)},
            {"actor_hidden", c.actor_hidden},
            {"critic_hidden", c.critic_hidden},
            {"reward_scale", c.reward_scale}};
}

AdaptiveConfig adaptive_config_from_json(const nlohmann::json& j, AdaptiveConfig c) {
    read_field(j, "gamma", c.gamma);
    read_field(j, "tau", c.tau);
    read_field(j, "alpha_plus", c.alpha_plus);
    read_field(j, "alpha_minus", c.alpha_minus);
    read_field(j, "beta", c.beta);
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "buffer_capacity", c.buffer_capacity);
    read_field(j, "actor_lr", c.actor_lr);
    read_field(j, "critic_lr", c.critic_lr);
    read_field(j, "noise_scale", c.noise_scale);
    read_field(j, "noise_theta", c.noise_theta);
    read_field(j, "noise_final_fraction", c.noise_final_fraction);
    read_field(j, "regime_window", c.regime_window);
    read_field(j, "regime_coupling", c.regime_coupling);
    read_field(j, "vanilla", c.vanilla);
    if (j.contains("delta_mode")) {
        std::string mode;
        read_field(j, "delta_mode", mode);
        c.delta_mode = delta_mode_from_string(mode);
    }
    read_field(j, "actor_hidden", c.actor_hidden);
    read_field(j, "critic_hidden", c.critic_hidden);
    read_field(j, "reward_scale", c.reward_scale);
    return c;
}

nlohmann::json to_json(const EnvConfig& c) {
    return {{"initial_cash", c.initial_cash},
            {"cost_rate", c.cost_rate},
            {"lookback", c.lookback},
            {"episode_length", c.episode_length},
            {"random_start", c.random_start}};
}

EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig c) {
    read_field(j, "initial_cash", c.initial_cash);
    read_field(j, "cost_rate", c.cost_rate);
    read_field(j, "lookback", c.lookback);
    read_field(j, "episode_length", c.episode_length);
    read_field(j, "random_start", c.random_start);
    return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Noise

NoiseProcess::NoiseProcess(NoiseKind kind, std::size_t dims, double scale, double theta, std::uint64_t seed)
    : kind_(kind), scale_(scale), theta_(theta), state_(Vector::Zero(static_cast<Eigen::Index>(dims))), rng_(seed) {
    if (!(theta > 0.0 && theta <= 1.0)) throw InvalidParams("noise theta must lie in (0, 1]");
    if (!(scale >= 0.0)) throw InvalidParams("noise scale must be >= 0");
}

Vector NoiseProcess::sample() {
    // Innovation variance chosen so the stationary std of x equals scale_.
    const double innovation = scale_ * std::sqrt(theta_ * (2.0 - theta_));
    for (Eigen::Index i = 0; i < state_.size(); ++i)
        state_(i) += -theta_ * state_(i) + innovation * normal_(rng_);
    if (kind_ == NoiseKind::Negative) return -state_.cwiseAbs();
    return state_;
}

void NoiseProcess::reset() {
    state_.setZero();
    normal_.reset();
}

// ---------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidParams("replay buffer capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw OutOfRange("replay buffer index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
    if (items_.size() < n || items_.empty())
        throw InsufficientSamples("requested " + std::to_string(n) + " samples from a buffer of " +
                                  std::to_string(items_.size()));
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(items_[pick(rng)]);
    return out;
}

// ---------------------------------------------------------------------------
// Networks

AgentNets AgentNets::create(std::size_t feature_dim, std::size_t action_dim, const AdaptiveConfig& cfg,
                            std::uint64_t seed) {
    std::vector<std::size_t> actor_sizes{feature_dim};
    actor_sizes.insert(actor_sizes.end(), cfg.actor_hidden.begin(), cfg.actor_hidden.end());
    actor_sizes.push_back(action_dim);
    std::vector<std::size_t> critic_sizes{feature_dim + action_dim};
    critic_sizes.insert(critic_sizes.end(), cfg.critic_hidden.begin(), cfg.critic_hidden.end());
    critic_sizes.push_back(1);

    AgentNets nets;
    nets.actor = Mlp::init(actor_sizes, OutputActivation::ScaledTanh, derive_seed(seed, 1), 1.0);
    nets.critic = Mlp::init(critic_sizes, OutputActivation::Linear, derive_seed(seed, 2));
    nets.target_actor = nets.actor;
    nets.target_critic = nets.critic;
    return nets;
}

void AgentNets::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    actor.save(dir / "actor.json");
    critic.save(dir / "critic.json");
    target_actor.save(dir / "target_actor.json");
    target_critic.save(dir / "target_critic.json");
}

AgentNets AgentNets::load(const std::filesystem::path& dir) {
    AgentNets nets;
    nets.actor = Mlp::load(dir / "actor.json");
    nets.critic = Mlp::load(dir / "critic.json");
    nets.target_actor = Mlp::load(dir / "target_actor.json");
    nets.target_critic = Mlp::load(dir / "target_critic.json");
    if (!nets.actor.same_shape(nets.target_actor) || !nets.critic.same_shape(nets.target_critic) ||
        nets.critic.input_size() != nets.actor.input_size() + nets.actor.output_size() ||
        nets.critic.output_size() != 1)
        throw InvalidShape("checkpoint networks have inconsistent shapes");
    return nets;
}

Batch Batch::from(const std::vector<Transition>& transitions) {
    if (transitions.empty()) throw EmptyBatch("empty transition batch");
    const auto n = static_cast<Eigen::Index>(transitions.size());
    const auto f = transitions.front().state.size();
    const auto d = transitions.front().action.size();
    Batch b;
    b.states.resize(f, n);
    b.next_states.resize(f, n);
    b.actions.resize(d, n);
    b.rewards.resize(n);
    b.done.resize(transitions.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& t = transitions[static_cast<std::size_t>(k)];
        if (t.state.size() != f || t.next_state.size() != f || t.action.size() != d)
            throw ShapeMismatch("transitions in a batch differ in shape");
        b.states.col(k) = t.state;
        b.next_states.col(k) = t.next_state;
        b.actions.col(k) = t.action;
        b.rewards(k) = t.reward;
        b.done[static_cast<std::size_t>(k)] = t.done;
    }
    return b;
}

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

}  // namespace

TradeAction select_action(const AgentNets& nets, const Vector& features, NoiseProcess* noise) {
    if (static_cast<std::size_t>(features.size()) != nets.actor.input_size())
        throw ShapeMismatch("feature length does not match actor input");
    Vector a = nets.actor.forward(features);
    if (noise) a += noise->sample();
    return TradeAction{a.cwiseMax(-1.0).cwiseMin(1.0)};
}

double discounted_return(std::span<const double> rewards, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidParams("gamma must lie in [0, 1]");
    double r = 0.0;
    for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) r = *it + gamma * r;
    return r;
}

Vector td_target(const AgentNets& nets, const Batch& batch, double gamma) {
    if (batch.size() == 0) throw EmptyBatch("empty transition batch");
    const Matrix next_actions = nets.target_actor.forward(batch.next_states);
    const Matrix next_q = nets.target_critic.forward(stack(batch.next_states, next_actions));
    Vector y = batch.rewards;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch.done[i]) y(static_cast<Eigen::Index>(i)) += gamma * next_q(0, static_cast<Eigen::Index>(i));
    }
    return y;
}

Vector td_target(const AgentNets& nets, const std::vector<Transition>& batch, double gamma) {
    return td_target(nets, Batch::from(batch), gamma);
}

double prediction_error(const AgentNets& nets, const Transition& t, double gamma, DeltaMode mode) {
    const Batch b = Batch::from({t});
    const double q = nets.critic.forward(stack(b.states, b.actions))(0, 0);
    if (mode == DeltaMode::Reward) return t.reward - q;
    return td_target(nets, b, gamma)(0) - q;
}

std::pair<double, double> active_rates(const AdaptiveConfig& cfg, Regime regime) {
    if (cfg.regime_coupling && regime == Regime::Bear) return {cfg.alpha_minus, cfg.alpha_plus};
    return {cfg.alpha_plus, cfg.alpha_minus};
}

double sample_weight(double delta, double rate_positive, double rate_negative) {
    if (delta > 0.0) return rate_positive;
    if (delta < 0.0) return rate_negative;
    return std::max(rate_positive, rate_negative);
}

CriticGradient critic_loss_gradient(const AgentNets& nets, const Batch& batch, const AdaptiveConfig& cfg,
                                    Regime regime) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) throw EmptyBatch("empty transition batch");
    const Vector y = td_target(nets, batch, cfg.gamma);
    Mlp::Cache cache;
    const Matrix q = nets.critic.forward(stack(batch.states, batch.actions), &cache);
    const auto [rate_pos, rate_neg] = active_rates(cfg, regime);

    CriticGradient out;
    out.deltas.resize(n);
    out.weights.resize(n);
    Matrix upstream(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = y(i) - q(0, i);
        out.deltas(i) = cfg.delta_mode == DeltaMode::Reward ? batch.rewards(i) - q(0, i) : diff;
        const double c = sample_weight(out.deltas(i), rate_pos, rate_neg);
        out.weights(i) = c;
        out.loss += c * (diff * diff);
        upstream(0, i) = -2.0 * diff / static_cast<double>(n);
        upstream(0, i) *= c;
    }
    out.loss /= static_cast<double>(n);
    out.grads = nets.critic.backward(cache, upstream);
    return out;
}

namespace {

CriticStepStats summarize(double loss, const Vector& deltas) {
    CriticStepStats s;
    s.loss = loss;
    s.mean_abs_delta = deltas.cwiseAbs().mean();
    s.frac_positive = static_cast<double>((deltas.array() > 0.0).count()) / static_cast<double>(deltas.size());
    return s;
}

}  // namespace

CriticStepStats adaptive_critic_step(AgentNets& nets, Adam& opt, const Batch& batch, const AdaptiveConfig& cfg,
                                     Regime regime) {
    CriticGradient g = critic_loss_gradient(nets, batch, cfg, regime);
    CriticStepStats s = summarize(g.loss, g.deltas);
    if ((g.weights.array() != 0.0).any()) {
        opt.apply(nets.critic, g.grads);
        s.updated = true;
    }
    return s;
}

CriticStepStats vanilla_critic_step(AgentNets& nets, Adam& opt, const Batch& batch, double gamma) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) throw EmptyBatch("empty transition batch");
    const Vector y = td_target(nets, batch, gamma);
    Mlp::Cache cache;
    const Matrix q = nets.critic.forward(stack(batch.states, batch.actions), &cache);
    Vector deltas(n);
    Matrix upstream(1, n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = y(i) - q(0, i);
        deltas(i) = diff;
        loss += diff * diff;
        upstream(0, i) = -2.0 * diff / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    opt.apply(nets.critic, nets.critic.backward(cache, upstream));
    CriticStepStats s = summarize(loss, deltas);
    s.updated = true;
    return s;
}

ActionValueFn critic_action_value(const Mlp& critic) {
    return [&critic](const Matrix& states, const Matrix& actions, Matrix* dq_da) {
        Mlp::Cache cache;
        Matrix q = critic.forward(stack(states, actions), &cache);
        if (dq_da) {
            Matrix input_grad;
            critic.backward(cache, Matrix::Ones(1, q.cols()), &input_grad);
            *dq_da = input_grad.bottomRows(actions.rows());
        }
        return q;
    };
}

double actor_objective_gradient(const Mlp& actor, const Matrix& states, const ActionValueFn& q, Gradients* grads) {
    const auto n = states.cols();
    if (n == 0) throw EmptyBatch("empty state batch");
    Mlp::Cache cache;
    const Matrix actions = actor.forward(states, &cache);
    Matrix dq_da;
    const Matrix values = q(states, actions, grads ? &dq_da : nullptr);
    if (grads) *grads = actor.backward(cache, dq_da / static_cast<double>(n));
    return values.mean();
}

double actor_step(Mlp& actor, Adam& opt, const Matrix& states, const ActionValueFn& q) {
    Gradients g;
    const double objective = actor_objective_gradient(actor, states, q, &g);
    for (auto& w : g.weights) w = -w;
    for (auto& b : g.bias) b = -b;
    opt.apply(actor, g);
    return objective;
}

double actor_step(AgentNets& nets, Adam& opt, const Batch& batch) {
    return actor_step(nets.actor, opt, batch.states, critic_action_value(nets.critic));
}

void soft_update(AgentNets& nets, double tau) {
    soft_update(nets.target_critic, nets.critic, tau);
    soft_update(nets.target_actor, nets.actor, tau);
}

Vector softmax_policy(const Vector& q_values, double beta) {
    if (q_values.size() == 0) throw InvalidParams("softmax over an empty vector");
    if (!q_values.allFinite()) throw InvalidParams("softmax inputs must be finite");
    if (!(beta >= 0.0)) throw InvalidParams("beta must be >= 0");
    const Vector scaled = beta * q_values;
    const Vector e = (scaled.array() - scaled.maxCoeff()).exp();
    return e / e.sum();
}

Vector decision_utilities(const AgentNets& nets, const Vector& features, std::size_t candidates, std::uint64_t seed) {
    if (candidates == 0) throw InvalidParams("need at least one candidate action");
    const auto d = static_cast<Eigen::Index>(nets.action_dim());
    const auto n = static_cast<Eigen::Index>(candidates);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix buy(d, n);
    Matrix sell(d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < d; ++i) {
            buy(i, c) = 1.0 - unit(rng);  // (0, 1]
            sell(i, c) = -(1.0 - unit(rng));
        }
    }
    const Matrix states = features.replicate(1, n);
    Vector q(3);
    q(0) = nets.critic.forward(stack(states, buy)).mean();
    q(1) = nets.critic.forward(stack(Matrix(features), Matrix::Zero(d, 1)))(0, 0);
    q(2) = nets.critic.forward(stack(states, sell)).mean();
    return q;
}

void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "episode,total_reward,mean_abs_delta,frac_positive_delta,regime_frac_bull\n" << std::setprecision(17);
    for (const auto& e : log.episodes) {
        os << e.episode << ',' << e.total_reward << ',' << e.mean_abs_delta << ',' << e.frac_positive_delta << ','
           << e.regime_frac_bull << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

double resolve_reward_scale(const AdaptiveConfig& cfg, const EnvConfig& env) {
    return cfg.reward_scale > 0.0 ? cfg.reward_scale : 100.0 / env.initial_cash;
}

}  // namespace

Trainer::Trainer(PriceSeries data, std::vector<double> index, EnvConfig env, AdaptiveConfig cfg, std::uint64_t seed)
    : data_((data.validate(), std::move(data))),
      index_(index.empty() ? index_series(data_) : std::move(index)),
      env_((env.validate(), env)),
      cfg_((cfg.validate(), std::move(cfg))),
      reward_scale_(resolve_reward_scale(cfg_, env_)),
      nets_(AgentNets::create(feature_size(data_.assets(), env_.lookback), data_.assets(), cfg_, seed)),
      critic_opt_(nets_.critic, cfg_.critic_lr),
      actor_opt_(nets_.actor, cfg_.actor_lr),
      buffer_(cfg_.buffer_capacity),
      noise_plus_(NoiseKind::Positive, data_.assets(), cfg_.noise_scale, cfg_.noise_theta, derive_seed(seed, 3)),
      noise_minus_(NoiseKind::Negative, data_.assets(), cfg_.noise_scale, cfg_.noise_theta, derive_seed(seed, 4)),
      sample_rng_(derive_seed(seed, 5)),
      start_rng_(derive_seed(seed, 6)) {
    if (index_.size() != data_.days()) throw InvalidParams("index length does not match the price series");
}

void Trainer::begin_episode(std::size_t episode, std::size_t total) {
    episode_ = episode;
    const std::size_t last = data_.days() - 1;
    std::size_t start = 0;
    std::size_t span = env_.episode_length == 0 ? last : std::min(env_.episode_length, last);
    if (env_.random_start && span < last) {
        std::uniform_int_distribution<std::size_t> pick(0, last - span);
        start = pick(start_rng_);
    }
    end_t_ = start + span;
    state_ = reset(data_, env_.initial_cash, start);
    log_.last_index_seen = std::max(log_.last_index_seen, start);

    const double progress = total > 1 ? static_cast<double>(episode) / static_cast<double>(total - 1) : 0.0;
    const double scale = cfg_.noise_scale * (1.0 - (1.0 - cfg_.noise_final_fraction) * progress);
    noise_plus_.set_scale(scale);
    noise_minus_.set_scale(scale);
    noise_plus_.reset();
    noise_minus_.reset();

    ep_reward_ = ep_abs_delta_ = ep_positive_ = 0.0;
    ep_delta_count_ = ep_updates_ = ep_steps_ = ep_bull_ = 0;
    active_ = true;
}

bool Trainer::step() {
    if (!active_) return false;
    const bool coupled = cfg_.regime_coupling && !cfg_.vanilla;
    const Regime regime = coupled ? regime_signal(index_, state_.t, cfg_.regime_window) : Regime::Bull;
    if (regime_signal(index_, state_.t, cfg_.regime_window) == Regime::Bull) ++ep_bull_;

    const Vector features = state_features(state_, data_, env_.lookback);
    NoiseProcess& noise = regime == Regime::Bull ? noise_plus_ : noise_minus_;
    const TradeAction action = select_action(nets_, features, &noise);
    StepResult res = bullbear::step(state_, action, data_, env_.cost_rate);
    log_.last_index_seen = std::max(log_.last_index_seen, res.next_state.t);
    const bool done = res.done || res.next_state.t >= end_t_;

    ep_reward_ += res.reward;
    ++ep_steps_;
    buffer_.push({features, action.a, res.reward * reward_scale_, state_features(res.next_state, data_, env_.lookback),
                  done});
    state_ = std::move(res.next_state);

    if (buffer_.size() >= cfg_.batch_size) {
        const Batch batch = Batch::from(buffer_.sample(cfg_.batch_size, sample_rng_));
        const CriticStepStats stats = cfg_.vanilla ? vanilla_critic_step(nets_, critic_opt_, batch, cfg_.gamma)
                                                   : adaptive_critic_step(nets_, critic_opt_, batch, cfg_, regime);
        ep_abs_delta_ += stats.mean_abs_delta;
        ep_positive_ += stats.frac_positive;
        ++ep_updates_;
        actor_step(nets_, actor_opt_, batch);
        soft_update(nets_, cfg_.tau);
    }
    if (done) active_ = false;
    return active_;
}

EpisodeLog Trainer::end_episode() {
    while (step()) {
    }
    EpisodeLog e;
    e.episode = episode_;
    e.total_reward = ep_reward_;
    e.mean_abs_delta = ep_updates_ ? ep_abs_delta_ / static_cast<double>(ep_updates_) : 0.0;
    e.frac_positive_delta = ep_updates_ ? ep_positive_ / static_cast<double>(ep_updates_) : 0.0;
    e.regime_frac_bull = ep_steps_ ? static_cast<double>(ep_bull_) / static_cast<double>(ep_steps_) : 0.0;
    log_.episodes.push_back(e);
    return e;
}

TrainingLog Trainer::run(std::size_t episodes) {
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        begin_episode(ep, episodes);
        end_episode();
    }
    return log_;
}

TrainResult train(const PriceSeries& data, const std::vector<double>& index, const EnvConfig& env,
                  const AdaptiveConfig& cfg, std::size_t episodes, std::uint64_t seed) {
    Trainer trainer(data, index, env, cfg, seed);
    TrainingLog log = trainer.run(episodes);
    return {trainer.nets(), std::move(log)};
}

Rollout rollout(const AgentNets& nets, const PriceSeries& data, const EnvConfig& env, std::size_t start,
                NoiseProcess* noise) {
    EnvState s = reset(data, env.initial_cash, start);
    Rollout out;
    out.values.push_back(s.value());
    out.trace.push_back({s.t, data.dates[s.t], s.value(), s.b, 0.0, s.weights(), Vector::Zero(s.p.size())});
    bool done = false;
    while (!done) {
        const TradeAction a = select_action(nets, state_features(s, data, env.lookback), noise);
        StepResult r = step(s, a, data, env.cost_rate);
        done = r.done;
        s = std::move(r.next_state);
        out.values.push_back(s.value());
        out.trace.push_back({s.t, data.dates[s.t], s.value(), s.b, r.reward, s.weights(), r.executed});
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& dir, const AgentNets& nets, const AdaptiveConfig& cfg,
                     const EnvConfig& env) {
    nets.save(dir);
    std::ofstream os(dir / "config.json");
    if (!os) throw IoError("cannot write " + (dir / "config.json").string());
    nlohmann::json j{{"format", "bullbear-checkpoint"}, {"version", 1}, {"agent", to_json(cfg)}, {"env", to_json(env)}};
    os << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw FileNotFound(dir.string());
    Checkpoint c;
    c.nets = AgentNets::load(dir);
    std::ifstream in(dir / "config.json");
    if (!in) throw FileNotFound((dir / "config.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError((dir / "config.json").string() + ": " + e.what());
    }
    c.config = adaptive_config_from_json(j.value("agent", nlohmann::json::object()));
    c.env = env_config_from_json(j.value("env", nlohmann::json::object()));
    return c;
}

}  // namespace bullbear
