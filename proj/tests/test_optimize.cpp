#include <doctest.h>

#include <cmath>

#include "sic/optimize.hpp"
#include "sic/synth.hpp"

using namespace sic;

TEST_SUITE_BEGIN("optimize");

TEST_CASE("1-d quadratic") {
    BoundedProblem p;
    p.lower = VecX::Constant(1, 0.0);
    p.upper = VecX::Constant(1, 10.0);
    p.x0 = VecX::Constant(1, 0.0);
    p.objective = [](const VecX& x) { return (x(0) - 3.0) * (x(0) - 3.0); };
    const OptimResult r = minimize(p);
    CHECK(r.converged);
    CHECK(r.x(0) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.f <= (0.0 - 3.0) * (0.0 - 3.0));
}

TEST_CASE("rosenbrock within box") {
    BoundedProblem p;
    p.lower = VecX::Constant(2, -2.0);
    p.upper = VecX::Constant(2, 2.0);
    p.x0 = VecX(2);
    p.x0 << -1.2, 1.0;
    p.objective = [](const VecX& x) {
        const double a = 1.0 - x(0);
        const double b = x(1) - x(0) * x(0);
        return a * a + 100.0 * b * b;
    };
    NelderMeadOptions opt;
    opt.max_iterations = 2000;
    const OptimResult r = minimize(p, opt);
    CHECK(std::abs(r.x(0) - 1.0) < 1e-4);
    CHECK(std::abs(r.x(1) - 1.0) < 1e-4);
}

TEST_CASE("iterates and result stay within bounds") {
    BoundedProblem p;
    p.lower = VecX::Constant(3, -1.0);
    p.upper = VecX::Constant(3, 1.0);
    p.x0 = VecX::Zero(3);
    bool violated = false;
    p.objective = [&](const VecX& x) {
        for (int i = 0; i < 3; ++i)
            if (x(i) < -1.0 || x(i) > 1.0) violated = true;
        return (x - VecX::Constant(3, 5.0)).squaredNorm();  // optimum outside the box
    };
    const OptimResult r = minimize(p);
    CHECK(!violated);
    for (int i = 0; i < 3; ++i) CHECK(r.x(i) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("non-finite objective at x0 throws") {
    BoundedProblem p;
    p.lower = VecX::Constant(1, -1.0);
    p.upper = VecX::Constant(1, 1.0);
    p.x0 = VecX::Zero(1);
    p.objective = [](const VecX&) { return std::nan(""); };
    CHECK_THROWS_AS((void)minimize(p), Error);
}

TEST_CASE("determinism: two runs are bit-identical") {
    auto run = [] {
        BoundedProblem p;
        p.lower = VecX::Constant(4, -5.0);
        p.upper = VecX::Constant(4, 5.0);
        p.x0 = VecX::Constant(4, 0.5);
        p.objective = [](const VecX& x) {
            double f = 0.0;
            for (int i = 0; i < 4; ++i) f += std::abs(x(i) - 0.3 * i) * (1.0 + 0.1 * i);
            return f;
        };
        return minimize(p);
    };
    const OptimResult a = run();
    const OptimResult b = run();
    CHECK(a.f == b.f);
    CHECK((a.x - b.x).norm() == 0.0);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("least squares solves a bounded linear fit") {
    // Residuals r_i = a*t_i + b - y_i with the optimum inside the box.
    const std::vector<double> ts{0.0, 1.0, 2.0, 3.0, 4.0};
    const double a_true = 0.7, b_true = -0.2;
    LeastSquaresProblem p;
    p.lower = VecX::Constant(2, -2.0);
    p.upper = VecX::Constant(2, 2.0);
    p.x0 = VecX::Zero(2);
    p.eval = [&](const VecX& x, VecX& r, MatX* jac) {
        r.resize(5);
        if (jac) jac->setZero(5, 2);
        for (int i = 0; i < 5; ++i) {
            r(i) = x(0) * ts[i] + x(1) - (a_true * ts[i] + b_true);
            if (jac) {
                (*jac)(i, 0) = ts[i];
                (*jac)(i, 1) = 1.0;
            }
        }
    };
    const OptimResult r = least_squares_bounded(p);
    CHECK(r.x(0) == doctest::Approx(a_true).epsilon(1e-10));
    CHECK(r.x(1) == doctest::Approx(b_true).epsilon(1e-10));
}

TEST_CASE("scale selection: identical curves give S = 1") {
    std::vector<double> r(100);
    for (int i = 0; i < 100; ++i) r[i] = 1.0 + i;
    CHECK(select_scale_epsilon(r, r, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scale selection: median variant solves the exact scaling") {
    std::vector<double> r_d(300), r_u(300);
    for (int i = 0; i < 300; ++i) {
        r_d[i] = 2.0 + i;
        r_u[i] = 2.0 * r_d[i];
    }
    CHECK(select_scale_median(r_u, r_d, 200) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("scale selection: epsilon constraint binds at the tangency point") {
    // Barrel-like displacement: r_d = r_u * (1 - 0.03 * (r_u/100)^2).
    std::vector<double> r_u(500), r_d(500);
    for (int i = 0; i < 500; ++i) {
        r_u[i] = 0.5 + 0.2 * i;
        const double x = r_u[i] / 100.0;
        r_d[i] = r_u[i] * (1.0 - 0.03 * x * x);
    }
    const double s = select_scale_epsilon(r_u, r_d, 0.0);
    // Tangency: S = max r_d/r_u, attained by the smallest radius sample.
    CHECK(s == doctest::Approx(r_d[0] / r_u[0]).epsilon(1e-12));

    // Infeasible bracket: every ratio above the upper bound.
    std::vector<double> tiny(10, 1.0), big(10, 10.0);
    CHECK_THROWS_AS((void)select_scale_epsilon(tiny, big, 0.0, 0.5, 2.0), Error);
}

TEST_CASE("scale selection: median variant needs a sign change") {
    std::vector<double> r_u(50), r_d(50);
    for (int i = 0; i < 50; ++i) {
        r_u[i] = 1.0 + i;
        r_d[i] = 10.0 * r_u[i];  // root at 10, outside [0.5, 2]
    }
    try {
        (void)select_scale_median(r_u, r_d, 20);
        FAIL("expected NoRoot");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoRoot);
    }
}

TEST_SUITE_END();
