#include <doctest.h>

#include <array>
#include <random>

#include "bullbear/agent.hpp"
#include "bullbear/errors.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bullbear;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

/// Sets every weight of `net` to zero and the output bias to `value`.
void make_constant(Mlp& net, double value) {
    for (auto& layer : net.layers()) {
        layer.weights.setZero();
        layer.bias.setZero();
    }
    net.layers().back().bias.setConstant(value);
}

Transition transition(double s, double a, double r, double s_next, bool done = false) {
    return {Vector::Constant(1, s), Vector::Constant(1, a), r, Vector::Constant(1, s_next), done};
}

AdaptiveConfig small_config() {
    AdaptiveConfig c;
    c.batch_size = 8;
    c.buffer_capacity = 500;
    c.actor_hidden = {8};
    c.critic_hidden = {8};
    c.regime_window = 5;
    return c;
}

PriceSeries noisy_market(std::size_t days, std::size_t assets, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.01);
    Matrix p(static_cast<Eigen::Index>(days), static_cast<Eigen::Index>(assets));
    for (Eigen::Index i = 0; i < p.cols(); ++i) p(0, i) = 50.0 + 10.0 * static_cast<double>(i);
    for (Eigen::Index t = 1; t < p.rows(); ++t)
        for (Eigen::Index i = 0; i < p.cols(); ++i) p(t, i) = p(t - 1, i) * std::exp(n(rng));
    return testing::make_series(p);
}

Batch random_batch(std::size_t f, std::size_t d, std::size_t n, std::mt19937_64& rng) {
    std::vector<Transition> ts;
    std::bernoulli_distribution terminal(0.2);
    for (std::size_t k = 0; k < n; ++k) {
        ts.push_back({random_matrix(static_cast<Eigen::Index>(f), 1, rng).col(0),
                      random_matrix(static_cast<Eigen::Index>(d), 1, rng, 0.5).col(0),
                      random_matrix(1, 1, rng)(0, 0), random_matrix(static_cast<Eigen::Index>(f), 1, rng).col(0),
                      terminal(rng)});
    }
    return Batch::from(ts);
}

void perturb(Mlp& net, std::mt19937_64& rng, double scale) {
    Vector theta = net.flat_parameters();
    theta += random_matrix(theta.size(), 1, rng, scale).col(0);
    net.set_flat_parameters(theta);
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("config validation") {
    AdaptiveConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = [](auto edit) {
        AdaptiveConfig x;
        edit(x);
        CHECK_THROWS_AS(x.validate(), InvalidParams);
    };
    bad([](AdaptiveConfig& x) { x.gamma = 1.5; });
    bad([](AdaptiveConfig& x) { x.tau = 0.0; });
    bad([](AdaptiveConfig& x) { x.tau = 1.1; });
    bad([](AdaptiveConfig& x) { x.alpha_minus = -0.1; });
    bad([](AdaptiveConfig& x) { x.beta = -1.0; });
    bad([](AdaptiveConfig& x) { x.batch_size = 0; });
    bad([](AdaptiveConfig& x) { x.buffer_capacity = 10; });

    c.alpha_plus = 0.7;
    c.delta_mode = DeltaMode::Reward;
    c.critic_hidden = {16};
    const AdaptiveConfig back = adaptive_config_from_json(to_json(c));
    CHECK(back.alpha_plus == 0.7);
    CHECK(back.delta_mode == DeltaMode::Reward);
    CHECK(back.critic_hidden == std::vector<std::size_t>{16});
    CHECK_THROWS_AS(adaptive_config_from_json({{"delta_mode", "bandit"}}), ConfigError);
    CHECK_THROWS_AS(adaptive_config_from_json({{"gamma", "high"}}), ConfigError);
}

TEST_CASE("discounted return") {
    const std::vector<double> r{1.0, 2.0, 3.0};
    CHECK(discounted_return(r, 0.0) == 1.0);
    CHECK(discounted_return(r, 1.0) == 6.0);
    const std::vector<double> ones{1.0, 1.0, 1.0};
    CHECK(discounted_return(ones, 0.99) == doctest::Approx(2.9701).epsilon(1e-14));
    CHECK(discounted_return(std::vector<double>{}, 0.5) == 0.0);
    CHECK_THROWS_AS(discounted_return(r, 1.01), InvalidParams);
}

TEST_CASE("td target and prediction error") {
    AdaptiveConfig cfg = small_config();
    cfg.critic_hidden = {4};
    auto nets = AgentNets::create(1, 1, cfg, 3);
    make_constant(nets.target_critic, 2.0);

    const Transition t = transition(0.4, 0.2, 1.0, -0.3);
    CHECK(td_target(nets, {t}, 0.0)(0) == 1.0);
    CHECK(td_target(nets, {t}, 0.99)(0) == doctest::Approx(2.98).epsilon(1e-14));
    CHECK(td_target(nets, {transition(0.4, 0.2, 1.0, -0.3, true)}, 0.99)(0) == 1.0);
    CHECK_THROWS_AS(td_target(nets, std::vector<Transition>{}, 0.99), EmptyBatch);

    const Vector y = td_target(nets, {t, transition(0.1, 0.0, -1.0, 0.0, true), transition(0.0, 0.5, 0.5, 1.0)}, 0.5);
    CHECK(y(0) == 2.0);
    CHECK(y(1) == -1.0);
    CHECK(y(2) == 1.5);

    make_constant(nets.critic, 2.0);
    CHECK(prediction_error(nets, t, 0.99) == doctest::Approx(0.98).epsilon(1e-14));
    CHECK(prediction_error(nets, t, 0.99, DeltaMode::Reward) == doctest::Approx(-1.0).epsilon(1e-14));
    make_constant(nets.critic, 2.98);
    CHECK(prediction_error(nets, t, 0.99) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(prediction_error(nets, transition(0.0, 0.0, 2.0, 0.0), 0.0) == doctest::Approx(-0.98).epsilon(1e-14));
}

TEST_CASE("regime rates and sample weights") {
    AdaptiveConfig c;
    c.alpha_plus = 1.0;
    c.alpha_minus = 0.0;
    CHECK(active_rates(c, Regime::Bull) == std::pair<double, double>{1.0, 0.0});
    CHECK(active_rates(c, Regime::Bear) == std::pair<double, double>{0.0, 1.0});
    c.regime_coupling = false;
    CHECK(active_rates(c, Regime::Bear) == std::pair<double, double>{1.0, 0.0});

    CHECK(sample_weight(0.3, 1.0, 0.25) == 1.0);
    CHECK(sample_weight(-0.3, 1.0, 0.25) == 0.25);
    CHECK(sample_weight(0.0, 1.0, 0.25) == 1.0);
    CHECK(sample_weight(0.0, 0.1, 0.6) == 0.6);
}

TEST_CASE("action selection") {
    AdaptiveConfig cfg = small_config();
    auto nets = AgentNets::create(6, 3, cfg, 5);
    std::mt19937_64 rng(1);
    const Vector x = random_matrix(6, 1, rng).col(0);
    const TradeAction a0 = select_action(nets, x);
    CHECK(select_action(nets, x).a == a0.a);
    CHECK(a0.a.cwiseAbs().maxCoeff() <= 1.0);

    NoiseProcess minus(NoiseKind::Negative, 3, 0.5, 0.15, 9);
    for (int k = 0; k < 200; ++k) {
        const TradeAction a = select_action(nets, x, &minus);
        CHECK((a.a.array() <= a0.a.array()).all());
        CHECK(a.a.cwiseAbs().maxCoeff() <= 1.0);
    }

    // Actor output 0.9 plus noise 0.3 clips to 1.
    AgentNets one = AgentNets::create(1, 1, cfg, 1);
    make_constant(one.actor, std::atanh(0.9));
    CHECK(select_action(one, Vector::Zero(1)).a(0) == doctest::Approx(0.9).epsilon(1e-14));
    NoiseProcess big(NoiseKind::Positive, 1, 1.0, 1.0, 0);
    int clipped = 0;
    for (int k = 0; k < 100; ++k) {
        const double v = select_action(one, Vector::Zero(1), &big).a(0);
        CHECK(v <= 1.0);
        clipped += v == 1.0;
    }
    CHECK(clipped > 0);
    CHECK_THROWS_AS(select_action(nets, Vector::Zero(5)), ShapeMismatch);
}

TEST_CASE("noise processes") {
    NoiseProcess a(NoiseKind::Positive, 2, 0.3, 0.15, 42);
    NoiseProcess b(NoiseKind::Positive, 2, 0.3, 0.15, 42);
    for (int k = 0; k < 20; ++k) CHECK(a.sample() == b.sample());

    NoiseProcess minus(NoiseKind::Negative, 4, 0.3, 0.15, 7);
    for (int k = 0; k < 5000; ++k) CHECK((minus.sample().array() <= 0.0).all());

    // Stationary spread equals the configured scale; successive draws correlate.
    NoiseProcess ou(NoiseKind::Positive, 1, 0.3, 0.15, 11);
    const int n = 400000;
    double s2 = 0.0, lag = 0.0, prev = 0.0;
    for (int k = 0; k < 1000; ++k) prev = ou.sample()(0);
    for (int k = 0; k < n; ++k) {
        const double x = ou.sample()(0);
        s2 += x * x;
        lag += x * prev;
        prev = x;
    }
    CHECK(std::sqrt(s2 / n) == doctest::Approx(0.3).epsilon(0.03));
    CHECK(lag / s2 == doctest::Approx(0.85).epsilon(0.03));

    NoiseProcess zero(NoiseKind::Positive, 3, 0.0, 0.15, 1);
    CHECK(zero.sample().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(NoiseProcess(NoiseKind::Positive, 1, -1.0, 0.15, 1), InvalidParams);
}

TEST_CASE("replay buffer") {
    ReplayBuffer buf(2);
    buf.push(transition(0, 0, 1.0, 0));
    buf.push(transition(0, 0, 2.0, 0));
    buf.push(transition(0, 0, 3.0, 0));
    CHECK(buf.size() == 2);
    CHECK(buf.inserted() == 3);
    CHECK(buf.at(0).reward == 2.0);
    CHECK(buf.at(1).reward == 3.0);
    CHECK_THROWS_AS(buf.at(2), OutOfRange);

    ReplayBuffer ring(7);
    for (int k = 0; k < 30; ++k) {
        ring.push(transition(0, 0, k, 0));
        CHECK(ring.size() <= 7);
        const int oldest = std::max(0, k - 6);
        for (std::size_t i = 0; i < ring.size(); ++i) CHECK(ring.at(i).reward == oldest + static_cast<int>(i));
    }

    std::mt19937_64 rng(1);
    CHECK(ring.sample(5, rng).size() == 5);
    CHECK(ring.sample(7, rng).size() == 7);
    CHECK_THROWS_AS(ring.sample(8, rng), InsufficientSamples);
    CHECK_THROWS_AS(ReplayBuffer(3).sample(1, rng), InsufficientSamples);
    std::mt19937_64 r1(5), r2(5);
    const auto s1 = ring.sample(6, r1);
    const auto s2 = ring.sample(6, r2);
    for (std::size_t i = 0; i < 6; ++i) CHECK(s1[i].reward == s2[i].reward);
}

TEST_CASE("replay sampling is uniform") {
    ReplayBuffer buf(10);
    for (int k = 0; k < 10; ++k) buf.push(transition(0, 0, k, 0));
    std::mt19937_64 rng(2024);
    const std::size_t n = 100000;
    std::array<double, 10> count{};
    for (std::size_t k = 0; k < n / 10; ++k)
        for (const auto& t : buf.sample(10, rng)) count[static_cast<std::size_t>(t.reward)] += 1.0;
    const double expected = n / 10.0;
    const double sd = std::sqrt(n * 0.1 * 0.9);
    double chi2 = 0.0;
    for (double c : count) {
        CHECK(std::abs(c - expected) < 4.0 * sd);
        chi2 += (c - expected) * (c - expected) / expected;
    }
    CHECK(chi2 < 27.88);  // 0.999 quantile, 9 degrees of freedom
}

TEST_CASE("softmax") {
    Vector q(3);
    q << 0.2, -1.0, 3.0;
    const Vector u = softmax_policy(q, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(u(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    Vector two(2);
    two << 1.0, 0.0;
    const Vector p = softmax_policy(two, 1.0);
    CHECK(p(0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
    CHECK(p(1) == doctest::Approx(0.2689414213699951).epsilon(1e-14));

    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
        const Vector v = random_matrix(3, 1, rng, 5.0).col(0);
        const double beta = std::abs(random_matrix(1, 1, rng)(0, 0)) * 3.0;
        const Vector s = softmax_policy(v, beta);
        CHECK(std::abs(s.sum() - 1.0) < 1e-12);
        CHECK((softmax_policy(v.array() + 123.4, beta) - s).cwiseAbs().maxCoeff() < 1e-12);
    }
    Vector huge(3);
    huge << 1000.0, 999.0, -1000.0;
    CHECK(softmax_policy(huge, 1.0).allFinite());
    CHECK_THROWS_AS(softmax_policy(q, -1.0), InvalidParams);
}

TEST_CASE("decision utilities") {
    AdaptiveConfig cfg = small_config();
    cfg.critic_hidden = {};
    auto nets = AgentNets::create(2, 2, cfg, 1);
    // Q(s, a) = a_1 + a_2
    nets.critic.layers()[0].weights << 0.0, 0.0, 1.0, 1.0;
    nets.critic.layers()[0].bias.setZero();
    const Vector u = decision_utilities(nets, Vector::Zero(2), 64, 7);
    CHECK(u(1) == 0.0);
    CHECK(u(0) > 0.0);
    CHECK(u(0) <= 2.0);
    CHECK(u(2) < 0.0);
    CHECK(u(2) >= -2.0);
    CHECK(decision_utilities(nets, Vector::Zero(2), 64, 7) == u);
    const Vector p = softmax_policy(u, 1.0);
    CHECK(p(0) > p(1));
    CHECK(p(1) > p(2));
}

TEST_CASE("critic step: hand fixture") {
    AdaptiveConfig cfg = small_config();
    cfg.critic_hidden = {};
    cfg.alpha_plus = 0.7;
    cfg.alpha_minus = 0.2;
    cfg.gamma = 0.99;
    cfg.critic_lr = 1e-3;
    auto nets = AgentNets::create(1, 1, cfg, 1);
    nets.critic.layers()[0].weights << 0.3, 0.4;
    nets.critic.layers()[0].bias << 0.1;
    make_constant(nets.target_critic, 2.0);
    const Batch batch = Batch::from({transition(1.0, 0.5, 1.0, 0.0)});

    // y = 2.98, Q = 0.3 + 0.2 + 0.1 = 0.6, delta = 2.38, c = 0.7
    const double delta = 2.98 - 0.6;
    const CriticGradient g = critic_loss_gradient(nets, batch, cfg, Regime::Bull);
    CHECK(g.deltas(0) == doctest::Approx(delta).epsilon(1e-14));
    CHECK(g.weights(0) == 0.7);
    CHECK(g.loss == doctest::Approx(0.7 * delta * delta).epsilon(1e-14));
    const std::array<double, 3> grad{-2.0 * 0.7 * delta * 1.0, -2.0 * 0.7 * delta * 0.5, -2.0 * 0.7 * delta};
    CHECK(g.grads.weights[0](0, 0) == doctest::Approx(grad[0]).epsilon(1e-14));
    CHECK(g.grads.weights[0](0, 1) == doctest::Approx(grad[1]).epsilon(1e-14));
    CHECK(g.grads.bias[0](0) == doctest::Approx(grad[2]).epsilon(1e-14));

    // In a bear regime the same positive error takes the other rate.
    CHECK(critic_loss_gradient(nets, batch, cfg, Regime::Bear).weights(0) == 0.2);

    // Two Adam steps by hand: beta1 0.9, beta2 0.999, eps 1e-8.
    Adam opt(nets.critic, cfg.critic_lr);
    std::array<double, 3> theta{0.3, 0.4, 0.1}, m{}, v{};
    for (int step = 1; step <= 2; ++step) {
        const double q = theta[0] * 1.0 + theta[1] * 0.5 + theta[2];
        const double d = 2.98 - q;
        const std::array<double, 3> gr{-1.4 * d, -1.4 * d * 0.5, -1.4 * d};
        for (int i = 0; i < 3; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * gr[i];
            v[i] = 0.999 * v[i] + 0.001 * gr[i] * gr[i];
            const double mh = m[i] / (1.0 - std::pow(0.9, step));
            const double vh = v[i] / (1.0 - std::pow(0.999, step));
            theta[i] -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
        }
        const CriticStepStats s = adaptive_critic_step(nets, opt, batch, cfg, Regime::Bull);
        CHECK(s.updated);
        CHECK(s.mean_abs_delta == doctest::Approx(std::abs(d)).epsilon(1e-12));
        CHECK(s.frac_positive == 1.0);
        CHECK(std::abs(nets.critic.layers()[0].weights(0, 0) - theta[0]) < 1e-10);
        CHECK(std::abs(nets.critic.layers()[0].weights(0, 1) - theta[1]) < 1e-10);
        CHECK(std::abs(nets.critic.layers()[0].bias(0) - theta[2]) < 1e-10);
    }
}

TEST_CASE("critic step: equal rates reduce to the plain critic step") {
    AdaptiveConfig cfg = small_config();
    cfg.alpha_plus = cfg.alpha_minus = 1.0;
    std::mt19937_64 rng(8);
    auto a = AgentNets::create(5, 2, cfg, 4);
    perturb(a.target_critic, rng, 0.1);
    auto b = a;
    Adam oa(a.critic, cfg.critic_lr), ob(b.critic, cfg.critic_lr);
    for (int k = 0; k < 100; ++k) {
        const Batch batch = random_batch(5, 2, 16, rng);
        const Regime regime = k % 2 ? Regime::Bear : Regime::Bull;
        const auto sa = adaptive_critic_step(a, oa, batch, cfg, regime);
        const auto sb = vanilla_critic_step(b, ob, batch, cfg.gamma);
        CHECK(sa.loss == sb.loss);
        CHECK(a.critic == b.critic);
    }
    CHECK(oa == ob);
}

TEST_CASE("critic step: zero rate on negative errors freezes the critic") {
    AdaptiveConfig cfg = small_config();
    cfg.alpha_plus = 1.0;
    cfg.alpha_minus = 0.0;
    std::mt19937_64 rng(9);
    auto nets = AgentNets::create(4, 2, cfg, 2);
    Adam opt(nets.critic, cfg.critic_lr);
    for (int k = 0; k < 20; ++k) {
        std::vector<Transition> ts;
        for (int i = 0; i < 16; ++i)
            ts.push_back({random_matrix(4, 1, rng).col(0), random_matrix(2, 1, rng, 0.5).col(0), -100.0,
                          random_matrix(4, 1, rng).col(0), false});
        const Batch batch = Batch::from(ts);
        const Mlp before = nets.critic;
        const Adam opt_before = opt;
        const CriticGradient g = critic_loss_gradient(nets, batch, cfg, Regime::Bull);
        CHECK((g.deltas.array() < 0.0).all());
        CHECK(g.grads.max_abs() == 0.0);
        const auto s = adaptive_critic_step(nets, opt, batch, cfg, Regime::Bull);
        CHECK_FALSE(s.updated);
        CHECK(nets.critic == before);
        CHECK(opt == opt_before);
    }
    CHECK_THROWS_AS(Batch::from({}), EmptyBatch);
}

TEST_CASE("critic gradient matches finite differences") {
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        AdaptiveConfig cfg = small_config();
        cfg.critic_hidden = {static_cast<std::size_t>(4 + k % 5)};
        if (k % 3 == 0) cfg.critic_hidden.push_back(5);
        cfg.alpha_plus = 0.3 + 0.05 * k;
        cfg.alpha_minus = 1.0 - 0.04 * k;
        cfg.delta_mode = k % 4 == 3 ? DeltaMode::Reward : DeltaMode::Bootstrapped;
        const std::size_t f = 3 + k % 4, d = 1 + k % 3;
        auto nets = AgentNets::create(f, d, cfg, static_cast<std::uint64_t>(k));
        perturb(nets.target_critic, rng, 0.2);
        const Batch batch = random_batch(f, d, 1 + k % 7, rng);
        const Regime regime = k % 2 ? Regime::Bear : Regime::Bull;
        const Vector analytic = Mlp::flatten(critic_loss_gradient(nets, batch, cfg, regime).grads);
        AgentNets probe = nets;
        const Vector numeric = oracle::central_difference(
            [&](const Vector& theta) {
                probe.critic.set_flat_parameters(theta);
                return critic_loss_gradient(probe, batch, cfg, regime).loss;
            },
            nets.critic.flat_parameters());
        worst = std::max(worst, oracle::max_relative_error(analytic, numeric));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("actor gradient matches finite differences") {
    std::mt19937_64 rng(23);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        AdaptiveConfig cfg = small_config();
        cfg.actor_hidden = {static_cast<std::size_t>(3 + k % 6)};
        cfg.critic_hidden = {6, static_cast<std::size_t>(2 + k % 3)};
        const std::size_t f = 2 + k % 5, d = 1 + k % 4;
        auto nets = AgentNets::create(f, d, cfg, static_cast<std::uint64_t>(100 + k));
        perturb(nets.actor, rng, 0.1);
        const Matrix states = random_matrix(static_cast<Eigen::Index>(f), 1 + k % 6, rng);
        const auto q = critic_action_value(nets.critic);
        Gradients g;
        actor_objective_gradient(nets.actor, states, q, &g);
        Mlp probe = nets.actor;
        const Vector numeric = oracle::central_difference(
            [&](const Vector& theta) {
                probe.set_flat_parameters(theta);
                return actor_objective_gradient(probe, states, q, nullptr);
            },
            nets.actor.flat_parameters());
        worst = std::max(worst, oracle::max_relative_error(Mlp::flatten(g), numeric));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("actor step") {
    SUBCASE("critic blind to the action leaves the actor unchanged") {
        AdaptiveConfig cfg = small_config();
        auto nets = AgentNets::create(4, 2, cfg, 6);
        nets.critic.layers()[0].weights.rightCols(2).setZero();
        std::mt19937_64 rng(1);
        const Batch batch = random_batch(4, 2, 8, rng);
        const Mlp before = nets.actor;
        Adam opt(nets.actor, cfg.actor_lr);
        const Mlp critic_before = nets.critic;
        actor_step(nets, opt, batch);
        CHECK(nets.actor == before);
        CHECK(nets.critic == critic_before);
    }
    SUBCASE("quadratic critic pulls the action toward its peak") {
        AdaptiveConfig cfg = small_config();
        auto nets = AgentNets::create(1, 1, cfg, 2);
        make_constant(nets.actor, 0.0);
        const ActionValueFn q = [](const Matrix&, const Matrix& a, Matrix* dq_da) {
            if (dq_da) *dq_da = -2.0 * (a.array() - 0.5);
            return Matrix(-(a.array() - 0.5).square());
        };
        Adam opt(nets.actor, 0.01);
        const Matrix s = Matrix::Zero(1, 1);
        double prev = nets.actor.forward(s)(0, 0);
        CHECK(prev == 0.0);
        double objective_prev = -0.25;
        for (int k = 0; k < 30; ++k) {
            const double objective = actor_step(nets.actor, opt, s, q);
            CHECK(objective >= objective_prev);
            objective_prev = objective;
            const double out = nets.actor.forward(s)(0, 0);
            CHECK(out > prev);
            CHECK(out < 0.5);
            prev = out;
        }
        CHECK(prev > 0.2);
    }
}

TEST_CASE("soft update of agent networks") {
    AdaptiveConfig cfg = small_config();
    auto nets = AgentNets::create(3, 2, cfg, 1);
    CHECK(nets.target_actor == nets.actor);
    CHECK(nets.target_critic == nets.critic);

    auto fill = [](Mlp& net, double v) { net.set_flat_parameters(Vector::Constant(net.flat_parameters().size(), v)); };
    fill(nets.actor, 1.0);
    fill(nets.critic, 1.0);
    fill(nets.target_actor, 0.0);
    fill(nets.target_critic, 0.0);
    auto half = nets;
    soft_update(half, 0.5);
    CHECK(half.target_actor.flat_parameters().cwiseEqual(0.5).all());
    CHECK(half.target_critic.flat_parameters().cwiseEqual(0.5).all());
    auto full = nets;
    soft_update(full, 1.0);
    CHECK(full.target_actor == full.actor);
    CHECK(full.target_critic == full.critic);

    for (int k = 0; k < 1000; ++k) soft_update(nets, 0.01);
    const double expected = 1.0 - std::pow(0.99, 1000);
    CHECK((nets.target_actor.flat_parameters().array() - expected).abs().maxCoeff() < 1e-12);
    CHECK((nets.target_critic.flat_parameters().array() - expected).abs().maxCoeff() < 1e-12);
    CHECK(nets.actor.flat_parameters().cwiseEqual(1.0).all());
}

TEST_CASE("checkpoint round trip") {
    testing::TempDir dir("agent");
    AdaptiveConfig cfg = small_config();
    cfg.alpha_minus = 0.25;
    EnvConfig env;
    env.lookback = 4;
    env.cost_rate = 0.001;
    std::mt19937_64 rng(4);
    auto nets = AgentNets::create(feature_size(3, 4), 3, cfg, 9);
    perturb(nets.target_actor, rng, 1e-3);
    save_checkpoint(dir / "ck", nets, cfg, env);
    const Checkpoint c = load_checkpoint(dir / "ck");
    CHECK(c.nets == nets);
    CHECK(to_json(c.config) == to_json(cfg));
    CHECK(to_json(c.env) == to_json(env));
    CHECK_THROWS_AS(load_checkpoint(dir / "nope"), FileNotFound);
    std::filesystem::remove(dir / "ck" / "critic.json");
    CHECK_THROWS_AS(load_checkpoint(dir / "ck"), FileNotFound);
}

TEST_CASE("training loop") {
    const PriceSeries data = noisy_market(60, 3, 5);
    EnvConfig env;
    env.lookback = 5;
    AdaptiveConfig cfg = small_config();

    SUBCASE("zero episodes leave the initial networks") {
        const TrainResult r = train(data, {}, env, cfg, 0, 3);
        CHECK(r.nets == AgentNets::create(feature_size(3, 5), 3, cfg, 3));
        CHECK(r.log.episodes.empty());
    }
    SUBCASE("deterministic given the seed") {
        const TrainResult a = train(data, {}, env, cfg, 3, 11);
        const TrainResult b = train(data, {}, env, cfg, 3, 11);
        const TrainResult c = train(data, {}, env, cfg, 3, 12);
        REQUIRE(a.log.episodes.size() == 3);
        CHECK(a.log.episodes == b.log.episodes);
        CHECK(a.nets == b.nets);
        CHECK_FALSE(a.nets == c.nets);
        CHECK(a.log.last_index_seen == 59);
        for (const auto& e : a.log.episodes) {
            CHECK(std::isfinite(e.total_reward));
            CHECK(e.mean_abs_delta > 0.0);
            CHECK(e.frac_positive_delta >= 0.0);
            CHECK(e.frac_positive_delta <= 1.0);
            CHECK(e.regime_frac_bull >= 0.0);
            CHECK(e.regime_frac_bull <= 1.0);
        }
        testing::TempDir dir("log");
        write_training_log_csv(a.log, dir / "log.csv");
        const std::string text = testing::read_file(dir / "log.csv");
        CHECK(text.rfind("episode,total_reward,mean_abs_delta,frac_positive_delta,regime_frac_bull\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    }
    SUBCASE("episode windows stay inside the data") {
        env.episode_length = 20;
        env.random_start = true;
        Trainer trainer(data, {}, env, cfg, 4);
        for (std::size_t ep = 0; ep < 10; ++ep) {
            trainer.begin_episode(ep, 10);
            const std::size_t start = trainer.state().t;
            std::size_t steps = 0;
            while (trainer.step()) ++steps;
            CHECK(steps + 1 == 20);
            CHECK(trainer.state().t == start + 20);
            CHECK(trainer.state().t <= 59);
            trainer.end_episode();
        }
        CHECK(trainer.buffer().size() == 200);
    }
    SUBCASE("equal rates without regime coupling match plain DDPG step by step") {
        AdaptiveConfig adaptive = cfg;
        adaptive.alpha_plus = adaptive.alpha_minus = 1.0;
        adaptive.regime_coupling = false;
        AdaptiveConfig vanilla = adaptive;
        vanilla.vanilla = true;
        Trainer a(data, {}, env, adaptive, 21);
        Trainer b(data, {}, env, vanilla, 21);
        std::size_t steps = 0;
        for (std::size_t ep = 0; steps < 100; ++ep) {
            a.begin_episode(ep, 3);
            b.begin_episode(ep, 3);
            bool more = true;
            while (more && steps < 100) {
                more = a.step();
                CHECK(b.step() == more);
                ++steps;
                CHECK(a.nets() == b.nets());
                CHECK(a.critic_optimizer() == b.critic_optimizer());
                CHECK(a.actor_optimizer() == b.actor_optimizer());
            }
        }
        CHECK(a.critic_optimizer().steps() > 50);
    }
    SUBCASE("bad inputs") {
        CHECK_THROWS_AS(Trainer(data, std::vector<double>(10, 1.0), env, cfg, 1), InvalidParams);
        cfg.gamma = 2.0;
        CHECK_THROWS_AS(Trainer(data, {}, env, cfg, 1), InvalidParams);
    }
}

TEST_CASE("greedy rollout") {
    const PriceSeries data = noisy_market(30, 2, 8);
    EnvConfig env;
    env.lookback = 3;
    AdaptiveConfig cfg = small_config();
    const auto nets = AgentNets::create(feature_size(2, 3), 2, cfg, 1);
    const Rollout a = rollout(nets, data, env, 4);
    const Rollout b = rollout(nets, data, env, 4);
    CHECK(a.values == b.values);
    CHECK(a.values.size() == 26);
    CHECK(a.values.front() == env.initial_cash);
    CHECK(a.trace.back().t == 29);
}

}  // TEST_SUITE
