/**
 * @file portfolio_opt.hpp
 * @brief Long-only Markowitz allocation under box and budget constraints.
 *
 * Both objectives are solved by projected gradient methods over the set
 *
 *     { w : lower <= w_i <= upper, sum(w) = budget }
 *
 * with an exact Euclidean projection onto it. Multi-start runs use fixed
 * restart seeds so results are reproducible.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bullbear/market_data.hpp"

namespace bullbear {

/// Annualized mean vector and covariance matrix.
struct Moments {
    Vector mu;
    Matrix sigma;

    std::size_t assets() const { return static_cast<std::size_t>(mu.size()); }
};

struct AllocationConstraints {
    double lower = 0.0;
    double upper = 0.2;
    double budget = 1.0;

    /// Throws Infeasible when no weight vector of length `d` satisfies the bounds.
    void check_feasible(std::size_t d) const;
    bool satisfied_by(const Vector& w, double tol = 1e-8) const;
};

struct PortfolioStats {
    double exp_return = 0.0;
    double volatility = 0.0;
    double sharpe = 0.0;  // NaN when volatility is zero and the Sharpe ratio was not requested
};

struct FrontierPoint {
    Vector weights;
    double exp_return = 0.0;
    double volatility = 0.0;
    double sharpe = 0.0;
    bool is_mvp = false;
    bool is_max_sharpe = false;
};

/// mu = days_per_year * column mean; sigma = days_per_year * unbiased sample
/// covariance. Rounding-level negative eigenvalues are clipped to zero.
Moments estimate_moments(const ReturnSeries& rs, int days_per_year = 252);
Moments estimate_moments(const Matrix& returns, int days_per_year = 252);

/// Throws ZeroVolatility when the portfolio has (numerically) no risk.
PortfolioStats portfolio_stats(const Vector& w, const Moments& m, double rf = 0.0);

/// Same, but leaves sharpe as NaN instead of throwing on zero volatility.
PortfolioStats portfolio_stats_unchecked(const Vector& w, const Moments& m, double rf = 0.0);

/// Euclidean projection onto {lower <= w <= upper, sum(w) = budget}.
Vector project_capped_simplex(const Vector& v, const AllocationConstraints& c);

/// Norm of w - P(w - g), zero exactly at a KKT point of the constrained problem.
double projected_gradient_norm(const Vector& w, const Vector& grad, const AllocationConstraints& c);

struct SolverOptions {
    int restarts = 16;
    int max_iterations = 10000;
    double tolerance = 1e-9;  // on the projected-gradient norm
    double armijo = 1e-4;
};

Vector min_variance(const Moments& m, const AllocationConstraints& c, const SolverOptions& opts = {});

/// Throws Degenerate when every feasible portfolio has zero volatility.
Vector max_sharpe(const Moments& m, double rf, const AllocationConstraints& c, const SolverOptions& opts = {});

/// Minimum-volatility portfolio with expected return equal to `target`,
/// which must lie within the achievable range.
Vector min_variance_for_return(const Moments& m, const AllocationConstraints& c, double target,
                               const SolverOptions& opts = {});

/// Largest wᵀmu reachable under the constraints (greedy fill).
double max_achievable_return(const Moments& m, const AllocationConstraints& c);

/// `n_points` portfolios with returns evenly spaced from the MVP return up to
/// the highest achievable return, sorted ascending; the first is the MVP.
std::vector<FrontierPoint> efficient_frontier(const Moments& m, const AllocationConstraints& c, std::size_t n_points,
                                              double rf = 0.0, const SolverOptions& opts = {});

/// `target_return,volatility,sharpe,w_1..w_D,is_mvp,is_max_sharpe`
void write_frontier_csv(const std::vector<FrontierPoint>& points, const std::filesystem::path& path);

}  // namespace bullbear
