#include "sic/optimize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace sic {

namespace {

double reflect_into(double x, double lo, double hi) {
    if (x < lo) x = lo + (lo - x);
    if (x > hi) x = hi - (x - hi);
    return std::clamp(x, lo, hi);
}

void reflect_into_bounds(VecX& x, const VecX& lo, const VecX& hi) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = reflect_into(x(i), lo(i), hi(i));
}

}  // namespace

void BoundedProblem::validate() const {
    if (lower.size() != x0.size() || upper.size() != x0.size())
        throw Error(ErrorCode::InvalidInput, "minimize: bound/x0 dimension mismatch");
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        if (!(lower(i) <= x0(i) && x0(i) <= upper(i)))
            throw Error(ErrorCode::InvalidInput, "minimize: x0 outside bounds");
        if (!(lower(i) <= upper(i)))
            throw Error(ErrorCode::InvalidInput, "minimize: inverted bounds");
    }
}

OptimResult minimize(const BoundedProblem& problem, const NelderMeadOptions& options) {
    problem.validate();
    const Eigen::Index n = problem.x0.size();
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    auto eval = [&](const VecX& x) {
        const double f = problem.objective(x);
        return std::isfinite(f) ? f : std::numeric_limits<double>::max();
    };

    const double f0 = problem.objective(problem.x0);
    if (!std::isfinite(f0))
        throw Error(ErrorCode::NonFiniteObjective, "minimize: objective non-finite at x0");

    VecX step = options.initial_step;
    if (step.size() != n) step = 0.05 * (problem.upper - problem.lower);

    std::vector<VecX> vx(n + 1, problem.x0);
    std::vector<double> vf(n + 1);
    vf[0] = f0;
    for (Eigen::Index i = 0; i < n; ++i) {
        VecX p = problem.x0;
        double s = step(i) != 0.0 ? step(i) : 1e-8;
        p(i) = reflect_into(p(i) + s, problem.lower(i), problem.upper(i));
        if (p(i) == problem.x0(i)) p(i) = reflect_into(problem.x0(i) - s, problem.lower(i), problem.upper(i));
        vx[i + 1] = p;
        vf[i + 1] = eval(p);
    }

    std::vector<int> order(n + 1);
    OptimResult result;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vf[a] < vf[b]; });

        const int best = order[0], worst = order[n], second_worst = order[n - 1];

        // Convergence: value spread and simplex diameter.
        const double spread = vf[worst] - vf[best];
        double diameter = 0.0;
        for (int k = 1; k <= n; ++k)
            diameter = std::max(diameter, (vx[order[k]] - vx[best]).norm());
        if (spread <= options.tol_f * (std::abs(vf[best]) + options.tol_f)) {
            result.converged = true;
            result.termination = "relative_objective_decrease";
            break;
        }
        if (diameter <= options.tol_x * (1.0 + vx[best].norm())) {
            result.converged = true;
            result.termination = "step_norm";
            break;
        }

        VecX centroid = VecX::Zero(n);
        for (int k = 0; k <= n; ++k)
            if (k != worst) centroid += vx[k];
        centroid /= static_cast<double>(n);

        VecX xr = centroid + alpha * (centroid - vx[worst]);
        reflect_into_bounds(xr, problem.lower, problem.upper);
        const double fr = eval(xr);

        if (fr < vf[best]) {
            VecX xe = centroid + gamma * (xr - centroid);
            reflect_into_bounds(xe, problem.lower, problem.upper);
            const double fe = eval(xe);
            if (fe < fr) {
                vx[worst] = xe;
                vf[worst] = fe;
            } else {
                vx[worst] = xr;
                vf[worst] = fr;
            }
        } else if (fr < vf[second_worst]) {
            vx[worst] = xr;
            vf[worst] = fr;
        } else {
            const bool outside = fr < vf[worst];
            VecX xc = outside ? centroid + rho * (xr - centroid) : centroid + rho * (vx[worst] - centroid);
            reflect_into_bounds(xc, problem.lower, problem.upper);
            const double fc = eval(xc);
            if (fc < (outside ? fr : vf[worst])) {
                vx[worst] = xc;
                vf[worst] = fc;
            } else {
                for (int k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    vx[k] = vx[best] + sigma * (vx[k] - vx[best]);
                    reflect_into_bounds(vx[k], problem.lower, problem.upper);
                    vf[k] = eval(vx[k]);
                }
            }
        }
    }

    int ibest = 0;
    for (int k = 1; k <= n; ++k)
        if (vf[k] < vf[ibest]) ibest = k;
    result.x = vx[ibest];
    result.f = vf[ibest];
    result.iterations = it;
    if (!result.converged) result.termination = "max_iterations";
    return result;
}

OptimResult least_squares_bounded(const LeastSquaresProblem& problem,
                                  const LevenbergMarquardtOptions& options) {
    BoundedProblem shape;
    shape.lower = problem.lower;
    shape.upper = problem.upper;
    shape.x0 = problem.x0;
    shape.objective = [](const VecX&) { return 0.0; };
    shape.validate();

    const Eigen::Index n = problem.x0.size();
    VecX x = problem.x0;
    VecX r;
    MatX jac;
    problem.eval(x, r, &jac);
    if (!r.allFinite())
        throw Error(ErrorCode::OptimizationDiverged, "least_squares: non-finite residual at x0");
    double cost = r.squaredNorm();

    double lambda = options.initial_lambda;
    OptimResult result;
    int it = 0;
    int stall = 0;
    for (; it < options.max_iterations; ++it) {
        const MatX jtj = jac.transpose() * jac;
        const VecX jtr = jac.transpose() * r;

        bool stepped = false;
        VecX x_new;
        double cost_new = cost;
        for (int attempt = 0; attempt < 30; ++attempt) {
            MatX a = jtj;
            for (Eigen::Index i = 0; i < n; ++i)
                a(i, i) += lambda * std::max(jtj(i, i), 1e-12);
            const VecX delta = a.ldlt().solve(-jtr);
            x_new = x + delta;
            for (Eigen::Index i = 0; i < n; ++i)
                x_new(i) = std::clamp(x_new(i), problem.lower(i), problem.upper(i));

            VecX r_new;
            problem.eval(x_new, r_new, nullptr);
            cost_new = r_new.allFinite() ? r_new.squaredNorm()
                                         : std::numeric_limits<double>::max();
            if (cost_new < cost) {
                stepped = true;
                lambda = std::max(lambda / 3.0, 1e-14);
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e15) break;
        }
        if (!stepped) {
            result.converged = true;
            result.termination = "lambda_limit";
            break;
        }

        const double decrease = cost - cost_new;
        const double step_norm = (x_new - x).norm();
        x = x_new;
        problem.eval(x, r, &jac);
        cost = r.squaredNorm();

        if (decrease <= options.tol_cost * (cost + 1e-300)) {
            if (++stall >= 2) {
                result.converged = true;
                result.termination = "relative_cost_decrease";
                break;
            }
        } else {
            stall = 0;
        }
        if (step_norm <= options.tol_step * (1.0 + x.norm())) {
            result.converged = true;
            result.termination = "step_norm";
            break;
        }
    }
    result.x = x;
    result.f = cost;
    result.iterations = it;
    if (!result.converged) result.termination = "max_iterations";
    return result;
}

double select_scale_epsilon(std::span<const double> r_u, std::span<const double> r_d,
                            double epsilon, double lo, double hi) {
    if (r_u.size() != r_d.size() || r_u.empty())
        throw Error(ErrorCode::InvalidInput, "select_scale: bad curve arrays");
    double sum_uu = 0.0, sum_ud = 0.0;
    double s_min = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r_u.size(); ++i) {
        sum_uu += r_u[i] * r_u[i];
        sum_ud += r_u[i] * r_d[i];
        if (r_u[i] > 1e-12) s_min = std::max(s_min, (r_d[i] - epsilon) / r_u[i]);
    }
    if (sum_uu <= 0.0)
        throw Error(ErrorCode::InvalidInput, "select_scale: zero curve");
    const double feasible_lo = std::max(lo, s_min);
    if (feasible_lo > hi)
        throw Error(ErrorCode::InfeasibleBracket, "select_scale: no feasible scale in bracket");
    const double unconstrained = sum_ud / sum_uu;
    return std::clamp(unconstrained, feasible_lo, hi);
}

double select_scale_median(std::span<const double> r_u, std::span<const double> r_d,
                           int n_nearest, double lo, double hi) {
    if (r_u.size() != r_d.size() || r_u.empty())
        throw Error(ErrorCode::InvalidInput, "select_scale: bad curve arrays");
    const std::size_t n = r_u.size();
    const std::size_t m = std::min<std::size_t>(std::max(n_nearest, 1), n);

    // n_nearest samples closest to the center of distortion (smallest r_d).
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::nth_element(idx.begin(), idx.begin() + (m - 1), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                         return r_d[a] != r_d[b] ? r_d[a] < r_d[b] : a < b;
                     });
    std::vector<double> ru(m), rd(m);
    for (std::size_t k = 0; k < m; ++k) {
        ru[k] = r_u[idx[k]];
        rd[k] = r_d[idx[k]];
    }

    std::vector<double> g(m);
    auto median_residual = [&](double s) {
        for (std::size_t k = 0; k < m; ++k) g[k] = s * ru[k] - rd[k];
        std::nth_element(g.begin(), g.begin() + m / 2, g.end());
        double med = g[m / 2];
        if (m % 2 == 0) {
            const double lower = *std::max_element(g.begin(), g.begin() + m / 2);
            med = 0.5 * (med + lower);
        }
        return med;
    };

    double glo = median_residual(lo), ghi = median_residual(hi);
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    if ((glo < 0.0) == (ghi < 0.0))
        throw Error(ErrorCode::NoRoot, "select_scale: median residual does not change sign");
    double a = lo, b = hi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (a + b);
        const double gm = median_residual(mid);
        if (gm == 0.0) return mid;
        if ((gm < 0.0) == (glo < 0.0)) {
            a = mid;
            glo = gm;
        } else {
            b = mid;
        }
        if (b - a < 1e-15 * std::max(1.0, std::abs(a))) break;
    }
    return 0.5 * (a + b);
}

}  // namespace sic
