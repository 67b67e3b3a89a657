#include "bullbear/portfolio_opt.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>

#include "bullbear/errors.hpp"

namespace bullbear {

void AllocationConstraints::check_feasible(std::size_t d) const {
    if (d == 0) throw Infeasible("no assets");
    if (!(lower <= upper)) throw Infeasible("lower bound exceeds upper bound");
    const double n = static_cast<double>(d);
    const double slack = 1e-12 * std::max(1.0, std::abs(budget));
    if (upper * n < budget - slack) throw Infeasible("upper bound too small to reach the budget");
    if (lower * n > budget + slack) throw Infeasible("lower bound too large for the budget");
}

bool AllocationConstraints::satisfied_by(const Vector& w, double tol) const {
    if (w.size() == 0 || !w.allFinite()) return false;
    return w.minCoeff() >= lower - tol && w.maxCoeff() <= upper + tol && std::abs(w.sum() - budget) <= tol;
}

Moments estimate_moments(const Matrix& returns, int days_per_year) {
    if (returns.rows() < 2) throw InsufficientData("need at least 2 return rows to estimate moments");
    const double n = static_cast<double>(returns.rows());
    Moments m;
    Vector mean = returns.colwise().mean().transpose();
    Matrix centered = returns.rowwise() - mean.transpose();
    Matrix cov = (centered.transpose() * centered) / (n - 1.0);
    cov = 0.5 * (cov + cov.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const double smallest = eig.eigenvalues().minCoeff();
    if (smallest < 0.0 && smallest > -1e-8) {
        Vector clipped = eig.eigenvalues().cwiseMax(0.0);
        cov = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        cov = 0.5 * (cov + cov.transpose());
    }
    m.mu = static_cast<double>(days_per_year) * mean;
    m.sigma = static_cast<double>(days_per_year) * cov;
    return m;
}

Moments estimate_moments(const ReturnSeries& rs, int days_per_year) {
    return estimate_moments(rs.returns, days_per_year);
}

PortfolioStats portfolio_stats_unchecked(const Vector& w, const Moments& m, double rf) {
    if (w.size() != m.mu.size()) throw ShapeMismatch("weight vector length does not match moments");
    PortfolioStats s;
    s.exp_return = w.dot(m.mu);
    s.volatility = std::sqrt(std::max(0.0, w.dot(m.sigma * w)));
    s.sharpe = s.volatility < 1e-12 ? std::numeric_limits<double>::quiet_NaN() : (s.exp_return - rf) / s.volatility;
    return s;
}

PortfolioStats portfolio_stats(const Vector& w, const Moments& m, double rf) {
    auto s = portfolio_stats_unchecked(w, m, rf);
    if (s.volatility < 1e-12) throw ZeroVolatility("portfolio volatility is zero; Sharpe ratio undefined");
    return s;
}

Vector project_capped_simplex(const Vector& v, const AllocationConstraints& c) {
    const auto n = v.size();
    c.check_feasible(static_cast<std::size_t>(n));
    if (c.upper - c.lower <= 0.0) return Vector::Constant(n, c.lower);

    auto clipped_sum = [&](double shift) { return (v.array() - shift).cwiseMax(c.lower).cwiseMin(c.upper).sum(); };

    // sum(clip(v - shift)) is piecewise linear and non-increasing in shift with
    // kinks at v_i - upper and v_i - lower; bisect over the sorted kinks, then
    // solve the linear piece exactly.
    std::vector<double> kinks;
    kinks.reserve(static_cast<std::size_t>(2 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        kinks.push_back(v(i) - c.upper);
        kinks.push_back(v(i) - c.lower);
    }
    std::sort(kinks.begin(), kinks.end());

    std::size_t lo = 0;
    std::size_t hi = kinks.size() - 1;  // clipped_sum(kinks[lo]) >= budget >= clipped_sum(kinks[hi])
    while (hi - lo > 1) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (clipped_sum(kinks[mid]) >= c.budget) lo = mid;
        else hi = mid;
    }
    const double s_lo = clipped_sum(kinks[lo]);
    const double s_hi = clipped_sum(kinks[hi]);
    double shift = kinks[lo];
    if (s_lo > s_hi) shift = kinks[lo] + (s_lo - c.budget) * (kinks[hi] - kinks[lo]) / (s_lo - s_hi);
    shift = std::clamp(shift, kinks[lo], kinks[hi]);

    Vector w = (v.array() - shift).cwiseMax(c.lower).cwiseMin(c.upper);

    // Spread the rounding residual over coordinates strictly inside the box.
    const double residual = c.budget - w.sum();
    if (residual != 0.0) {
        Eigen::Index free = 0;
        for (Eigen::Index i = 0; i < n; ++i) free += (w(i) > c.lower && w(i) < c.upper);
        if (free > 0) {
            const double share = residual / static_cast<double>(free);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (w(i) > c.lower && w(i) < c.upper) w(i) = std::clamp(w(i) + share, c.lower, c.upper);
            }
        }
    }
    return w;
}

double projected_gradient_norm(const Vector& w, const Vector& grad, const AllocationConstraints& c) {
    return (w - project_capped_simplex(w - grad, c)).norm();
}

namespace {

struct Objective {
    std::function<double(const Vector&)> value;  // +inf marks points outside the domain
    std::function<Vector(const Vector&)> gradient;
};

struct LocalResult {
    Vector w;
    double value = 0.0;
    double pg_norm = 0.0;
};

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking by halving. The very first trial step is 1.
LocalResult projected_descent(const Objective& obj, Vector w, const AllocationConstraints& c,
                              const SolverOptions& opts) {
    w = project_capped_simplex(w, c);
    double f = obj.value(w);
    Vector g = obj.gradient(w);
    double step = 1.0;
    double pg = projected_gradient_norm(w, g, c);

    for (int it = 0; it < opts.max_iterations && pg >= opts.tolerance; ++it) {
        double alpha = step;
        Vector candidate;
        double f_new = f;
        bool accepted = false;
        for (int halvings = 0; halvings < 80; ++halvings) {
            candidate = project_capped_simplex(w - alpha * g, c);
            f_new = obj.value(candidate);
            if (std::isfinite(f_new) && f_new <= f + opts.armijo * g.dot(candidate - w)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;

        Vector g_new = obj.gradient(candidate);
        const Vector s = candidate - w;
        const Vector y = g_new - g;
        const double sy = s.dot(y);
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : std::min(1e12, alpha * 2.0);

        const bool stalled = s.lpNorm<Eigen::Infinity>() == 0.0;
        w = std::move(candidate);
        f = f_new;
        g = std::move(g_new);
        pg = projected_gradient_norm(w, g, c);
        if (stalled) break;
    }
    return {w, f, pg};
}

bool lexicographically_less(const Vector& a, const Vector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) != b(i)) return a(i) < b(i);
    }
    return false;
}

/// Restart 0 starts from the equal-weight portfolio, restart k >= 1 from a
/// Dirichlet(1) draw seeded with k.
Vector restart_point(int k, std::size_t d, const AllocationConstraints& c) {
    const auto n = static_cast<Eigen::Index>(d);
    if (k == 0) return Vector::Constant(n, c.budget / static_cast<double>(d));
    std::mt19937_64 rng(static_cast<std::uint64_t>(k));
    std::exponential_distribution<double> expo(1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = expo(rng);
    return c.budget * v / v.sum();
}

LocalResult multi_start(const Objective& obj, std::size_t d, const AllocationConstraints& c,
                        const SolverOptions& opts) {
    LocalResult best;
    bool have = false;
    for (int k = 0; k < std::max(1, opts.restarts); ++k) {
        LocalResult r = projected_descent(obj, restart_point(k, d, c), c, opts);
        if (!std::isfinite(r.value)) continue;
        const double tie = 1e-14 * std::max(1.0, std::abs(r.value));
        if (!have || r.value < best.value - tie ||
            (std::abs(r.value - best.value) <= tie && lexicographically_less(r.w, best.w))) {
            best = std::move(r);
            have = true;
        }
    }
    if (!have) throw Degenerate("no restart produced a finite objective");
    return best;
}

double mean_diagonal_scale(const Matrix& sigma) {
    const double s = sigma.diagonal().cwiseAbs().mean();
    return s > 0.0 ? s : 1.0;
}

void check_moments(const Moments& m) {
    if (m.mu.size() == 0) throw Infeasible("no assets");
    if (m.sigma.rows() != m.mu.size() || m.sigma.cols() != m.mu.size())
        throw ShapeMismatch("covariance shape does not match mean vector");
}

}  // namespace

Vector min_variance(const Moments& m, const AllocationConstraints& c, const SolverOptions& opts) {
    check_moments(m);
    const std::size_t d = m.assets();
    c.check_feasible(d);
    const Matrix q = m.sigma / mean_diagonal_scale(m.sigma);
    Objective obj{[&](const Vector& w) { return w.dot(q * w); }, [&](const Vector& w) { return Vector(2.0 * (q * w)); }};
    return multi_start(obj, d, c, opts).w;
}

Vector max_sharpe(const Moments& m, double rf, const AllocationConstraints& c, const SolverOptions& opts) {
    check_moments(m);
    const std::size_t d = m.assets();
    c.check_feasible(d);
    const double vol_floor = 1e-12;

    bool any_risk = false;
    for (int k = 0; k < std::max(1, opts.restarts) && !any_risk; ++k) {
        Vector w = project_capped_simplex(restart_point(k, d, c), c);
        any_risk = std::sqrt(std::max(0.0, w.dot(m.sigma * w))) >= vol_floor;
    }
    if (!any_risk) throw Degenerate("every feasible portfolio has zero volatility");

    Objective obj{
        [&](const Vector& w) {
            const double var = w.dot(m.sigma * w);
            if (!(var > vol_floor * vol_floor)) return std::numeric_limits<double>::infinity();
            return -(w.dot(m.mu) - rf) / std::sqrt(var);
        },
        [&](const Vector& w) {
            const Vector sw = m.sigma * w;
            const double var = std::max(w.dot(sw), vol_floor * vol_floor);
            const double vol = std::sqrt(var);
            const double excess = w.dot(m.mu) - rf;
            return Vector(-(m.mu / vol - excess * sw / (var * vol)));
        }};
    return multi_start(obj, d, c, opts).w;
}

double max_achievable_return(const Moments& m, const AllocationConstraints& c) {
    check_moments(m);
    const std::size_t d = m.assets();
    c.check_feasible(d);
    std::vector<Eigen::Index> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return m.mu(a) > m.mu(b); });
    double remaining = c.budget - c.lower * static_cast<double>(d);
    double ret = c.lower * m.mu.sum();
    for (auto i : order) {
        const double add = std::min(c.upper - c.lower, remaining);
        if (add <= 0.0) break;
        ret += add * m.mu(i);
        remaining -= add;
    }
    return ret;
}

namespace {

/// Minimum variance over the maximum-return face: assets with mean above the
/// marginal one sit at the upper bound, below it at the lower bound, and the
/// marginal tie group shares what is left.
Vector max_return_portfolio(const Moments& m, const AllocationConstraints& c, const SolverOptions& opts) {
    const auto n = m.mu.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return m.mu(a) > m.mu(b); });

    Vector w = Vector::Constant(n, c.lower);
    double remaining = c.budget - c.lower * static_cast<double>(n);
    double marginal_mu = m.mu(order.front());
    for (auto i : order) {
        if (remaining <= 0.0) break;
        const double add = std::min(c.upper - c.lower, remaining);
        w(i) += add;
        remaining -= add;
        marginal_mu = m.mu(i);
    }

    const double tie = 1e-12 * std::max(1.0, m.mu.cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> group;
    double group_budget = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(m.mu(i) - marginal_mu) <= tie) {
            group.push_back(i);
            group_budget += w(i);
        }
    }
    if (group.size() < 2) return w;

    const auto g = static_cast<Eigen::Index>(group.size());
    Moments sub;
    sub.mu.resize(g);
    sub.sigma.resize(g, g);
    Vector fixed = w;
    for (auto i : group) fixed(i) = 0.0;
    Vector linear(g);
    for (Eigen::Index a = 0; a < g; ++a) {
        sub.mu(a) = m.mu(group[static_cast<std::size_t>(a)]);
        linear(a) = (m.sigma.row(group[static_cast<std::size_t>(a)]) * fixed)(0);
        for (Eigen::Index b = 0; b < g; ++b)
            sub.sigma(a, b) = m.sigma(group[static_cast<std::size_t>(a)], group[static_cast<std::size_t>(b)]);
    }
    AllocationConstraints sub_c{c.lower, c.upper, group_budget};
    const double scale = mean_diagonal_scale(m.sigma);
    Objective obj{[&](const Vector& x) { return (x.dot(sub.sigma * x) + 2.0 * linear.dot(x)) / scale; },
                  [&](const Vector& x) { return Vector(2.0 * (sub.sigma * x + linear) / scale); }};
    Vector x = multi_start(obj, group.size(), sub_c, opts).w;
    for (Eigen::Index a = 0; a < g; ++a) w(group[static_cast<std::size_t>(a)]) = x(a);
    return w;
}

}  // namespace

Vector min_variance_for_return(const Moments& m, const AllocationConstraints& c, double target,
                               const SolverOptions& opts) {
    check_moments(m);
    const std::size_t d = m.assets();
    c.check_feasible(d);

    const Vector mvp = min_variance(m, c, opts);
    const double mvp_ret = mvp.dot(m.mu);
    const double top_ret = max_achievable_return(m, c);
    const double ret_scale = std::max(1.0, m.mu.cwiseAbs().maxCoeff());
    if (target > top_ret + 1e-12 * ret_scale) throw Infeasible("target return above the achievable maximum");
    if (target >= top_ret - 1e-12 * ret_scale) return max_return_portfolio(m, c, opts);

    // Below the MVP the return constraint can bind from the other side; the
    // same augmented Lagrangian handles both, starting from a feasible blend.
    Vector anchor = mvp;
    Vector other = max_return_portfolio(m, c, opts);
    double other_ret = other.dot(m.mu);
    if (target < mvp_ret) {
        AllocationConstraints cc = c;
        Moments neg{-m.mu, m.sigma};
        other = max_return_portfolio(neg, cc, opts);
        other_ret = other.dot(m.mu);
        if (target < other_ret - 1e-12 * ret_scale) throw Infeasible("target return below the achievable minimum");
    }
    const double span = other_ret - mvp_ret;
    const double theta = std::abs(span) > 0.0 ? std::clamp((target - mvp_ret) / span, 0.0, 1.0) : 0.0;
    Vector w = (1.0 - theta) * anchor + theta * other;

    const double var_scale = mean_diagonal_scale(m.sigma);
    const Matrix q = m.sigma / var_scale;
    // Only differences between asset returns matter on the budget plane.
    const double spread = m.mu.maxCoeff() - m.mu.minCoeff();
    const double a_scale = spread > 0.0 ? spread : ret_scale;
    const Vector a = m.mu / a_scale;
    const double b = target / a_scale;
    const double rho = 10.0;
    double lambda = 0.0;

    for (int outer = 0; outer < 500; ++outer) {
        Objective obj{[&](const Vector& x) {
                          const double r = a.dot(x) - b;
                          return x.dot(q * x) - lambda * r + 0.5 * rho * r * r;
                      },
                      [&](const Vector& x) {
                          const double r = a.dot(x) - b;
                          return Vector(2.0 * (q * x) + (rho * r - lambda) * a);
                      }};
        LocalResult local = projected_descent(obj, w, c, opts);
        w = local.w;
        const double r = a.dot(w) - b;
        lambda -= rho * r;
        if (std::abs(r) < 1e-12 && local.pg_norm < opts.tolerance * 10.0) break;
    }
    return w;
}

std::vector<FrontierPoint> efficient_frontier(const Moments& m, const AllocationConstraints& c, std::size_t n_points,
                                              double rf, const SolverOptions& opts) {
    if (n_points < 2) throw InvalidParams("efficient frontier needs at least 2 points");
    check_moments(m);
    c.check_feasible(m.assets());

    const Vector mvp = min_variance(m, c, opts);
    const double lo = mvp.dot(m.mu);
    const double hi = std::max(lo, max_achievable_return(m, c));
    const bool flat = hi - lo <= 1e-12 * std::max(1.0, std::abs(lo));

    std::vector<FrontierPoint> out;
    out.reserve(n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
        Vector w;
        if (k == 0 || flat) {
            w = mvp;
        } else if (k + 1 == n_points) {
            w = max_return_portfolio(m, c, opts);
        } else {
            const double target = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_points - 1);
            w = min_variance_for_return(m, c, target, opts);
        }
        auto s = portfolio_stats_unchecked(w, m, rf);
        out.push_back({w, s.exp_return, s.volatility, s.sharpe, k == 0, false});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FrontierPoint& x, const FrontierPoint& y) { return x.exp_return < y.exp_return; });
    return out;
}

void write_frontier_csv(const std::vector<FrontierPoint>& points, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    const auto d = points.empty() ? 0 : points.front().weights.size();
    os << "target_return,volatility,sharpe";
    for (Eigen::Index i = 0; i < d; ++i) os << ",w_" << (i + 1);
    os << ",is_mvp,is_max_sharpe\n";
    os << std::setprecision(17);
    for (const auto& p : points) {
        os << p.exp_return << ',' << p.volatility << ',';
        if (std::isfinite(p.sharpe)) os << p.sharpe;
        else os << "nan";
        for (Eigen::Index i = 0; i < d; ++i) os << ',' << p.weights(i);
        os << ',' << (p.is_mvp ? 1 : 0) << ',' << (p.is_max_sharpe ? 1 : 0) << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace bullbear
