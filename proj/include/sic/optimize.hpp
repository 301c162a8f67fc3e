#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <string>

#include "sic/types.hpp"

namespace sic {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct BoundedProblem {
    VecX lower;
    VecX upper;
    VecX x0;
    std::function<double(const VecX&)> objective;

    void validate() const;
};

struct OptimResult {
    VecX x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string termination;
};

struct NelderMeadOptions {
    double tol_f = 1e-10;       // relative spread of simplex objective values
    double tol_x = 1e-10;       // simplex diameter, relative to |x|
    int max_iterations = 2000;  // one reflect/expand/contract cycle each
    VecX initial_step;          // per-dimension simplex offsets; empty = 5% of range
};

// Derivative-free bounded minimization (Nelder-Mead with bound reflection).
// Deterministic: identical inputs give bit-identical results.
OptimResult minimize(const BoundedProblem& problem, const NelderMeadOptions& options = {});

struct LeastSquaresProblem {
    VecX lower;
    VecX upper;
    VecX x0;
    // Fills residuals; when jacobian is non-null, fills the m x n Jacobian of
    // the residual vector as well (analytic).
    std::function<void(const VecX&, VecX&, MatX*)> eval;
};

struct LevenbergMarquardtOptions {
    int max_iterations = 200;
    double tol_cost = 1e-12;  // relative cost decrease
    double tol_step = 1e-12;  // step norm relative to |x|
    double initial_lambda = 1e-4;
};

// Levenberg-Marquardt with parameter projection onto the bounds.
OptimResult least_squares_bounded(const LeastSquaresProblem& problem,
                                  const LevenbergMarquardtOptions& options = {});

// Scale selection for a radial curve: minimizes sum_i (S*r_u[i] - r_d[i])^2
// subject to S*r_u[i] - r_d[i] > -epsilon for every i. The quadratic is
// clamped to the feasible interval intersected with [lo, hi].
double select_scale_epsilon(std::span<const double> r_u, std::span<const double> r_d,
                            double epsilon, double lo = 0.5, double hi = 2.0);

// Root of median(S*r_u[i] - r_d[i]) = 0 over the n_nearest samples of
// smallest r_d, by monotone bisection over [lo, hi].
double select_scale_median(std::span<const double> r_u, std::span<const double> r_d,
                           int n_nearest, double lo = 0.5, double hi = 2.0);

}  // namespace sic
