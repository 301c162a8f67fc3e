#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sic/geometry.hpp"
#include "sic/homography.hpp"
#include "sic/synth.hpp"

using namespace sic;

namespace {

Mat3 pose1_exact_homography() {
    const GroundTruthScene scene = pose1_scene();
    const Mat3 rot = rotation_from_axis_angle(scene.pose.theta);
    Mat3 e;
    e.col(0) = rot.col(0);
    e.col(1) = rot.col(1);
    e.col(2) = scene.pose.t;
    return scene.intrinsics.matrix() * e;
}

std::vector<Vec2> grid_mm(int nx, int ny, double pitch) {
    std::vector<Vec2> g;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            g.emplace_back((i - 0.5 * (nx - 1)) * pitch, (j - 0.5 * (ny - 1)) * pitch);
    return g;
}

double max_relative_error(const Mat3& a, const Mat3& b) {
    const Mat3 an = a / a(2, 2);
    const Mat3 bn = b / b(2, 2);
    double worst = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const double scale = std::max(std::abs(bn(r, c)), 1e-6);
            worst = std::max(worst, std::abs(an(r, c) - bn(r, c)) / scale);
        }
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("homography");

TEST_CASE("exact-data recovery in general position") {
    const Mat3 h_true = pose1_exact_homography();
    const auto pw = grid_mm(9, 7, 8.0);
    std::vector<Vec2> pd;
    for (const Vec2& p : pw) {
        const Vec3 q = h_true * Vec3(p.x(), p.y(), 1.0);
        pd.emplace_back(q.x() / q.z(), q.y() / q.z());
    }
    const Homography h = estimate_homography(pw, pd);
    CHECK(max_relative_error(h.m, h_true) < 1e-9);
}

TEST_CASE("three points raise InsufficientPoints") {
    const std::vector<Vec2> pw{{0, 0}, {1, 0}, {0, 1}};
    const std::vector<Vec2> pd{{0, 0}, {1, 0}, {0, 1}};
    CHECK_THROWS_WITH_AS((void)estimate_homography(pw, pd), doctest::Contains(">= 4"), Error);
}

TEST_CASE("collinear points raise DegenerateConfiguration") {
    std::vector<Vec2> pw, pd;
    for (int i = 0; i < 12; ++i) {
        pw.emplace_back(i, 2.0 * i);
        pd.emplace_back(10.0 + i, 5.0 + 2.0 * i);
    }
    try {
        (void)estimate_homography(pw, pd);
        FAIL("expected DegenerateConfiguration");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateConfiguration);
    }
}

TEST_CASE("svd and normal-equation paths agree on 1e3 points") {
    const Mat3 h_true = pose1_exact_homography();
    const GroundTruthScene scene = pose1_scene();
    GaussianRng rng(23);
    std::vector<Vec2> pw, pd;
    for (int i = 0; i < 1000; ++i) {
        const Vec2 p(-40.0 + 80.0 * rng.uniform01(), -30.0 + 60.0 * rng.uniform01());
        const Vec3 q = h_true * Vec3(p.x(), p.y(), 1.0);
        Vec2 image(q.x() / q.z(), q.y() / q.z());
        image += 0.1 * Vec2(rng.gaussian(), rng.gaussian());
        pw.push_back(p);
        pd.push_back(image);
    }
    const Homography via_svd = estimate_homography(pw, pd, DltMethod::Svd);
    const Homography via_normal = estimate_homography(pw, pd, DltMethod::NormalEquations);
    CHECK(max_relative_error(via_svd.m, via_normal.m) < 1e-9);
    (void)scene;
}

TEST_CASE("normalized DLT residual never exceeds the unnormalized residual") {
    const Mat3 h_true = pose1_exact_homography();
    GaussianRng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Vec2> pw, pd;
        for (int i = 0; i < 200; ++i) {
            const Vec2 p(-40.0 + 80.0 * rng.uniform01(), -30.0 + 60.0 * rng.uniform01());
            const Vec3 q = h_true * Vec3(p.x(), p.y(), 1.0);
            pw.push_back(p);
            pd.emplace_back(q.x() / q.z() + 0.5 * rng.gaussian(),
                            q.y() / q.z() + 0.5 * rng.gaussian());
        }
        auto rms_residual = [&](const Homography& h) {
            double acc = 0.0;
            const auto pp = reproject(h, pw);
            for (std::size_t i = 0; i < pw.size(); ++i) acc += (pp[i] - pd[i]).squaredNorm();
            return std::sqrt(acc / pw.size());
        };
        const double normalized = rms_residual(estimate_homography(pw, pd));
        const double raw = rms_residual(estimate_homography_unnormalized(pw, pd));
        CHECK(normalized <= raw + 1e-12);
    }
}

TEST_CASE("scale invariance of the estimate") {
    const Mat3 h_true = pose1_exact_homography();
    const auto pw = grid_mm(8, 6, 7.5);
    std::vector<Vec2> pd;
    for (const Vec2& p : pw) {
        const Vec3 q = h_true * Vec3(p.x(), p.y(), 1.0);
        pd.emplace_back(q.x() / q.z(), q.y() / q.z());
    }
    const Homography h = estimate_homography(pw, pd);

    const double k = 40.0;  // rescale target coordinates
    std::vector<Vec2> pw_scaled;
    for (const Vec2& p : pw) pw_scaled.push_back(p * k);
    const Homography h_scaled = estimate_homography(pw_scaled, pd);
    Mat3 expected = h.m;
    expected.col(0) /= k;
    expected.col(1) /= k;
    CHECK(max_relative_error(h_scaled.m, expected) < 1e-9);
}

TEST_CASE("reproject applies an affine homography exactly") {
    Mat3 a;
    a << 2.0, 0.5, 10.0, -0.25, 1.5, -3.0, 0.0, 0.0, 1.0;
    const Homography h = Homography::from_matrix(a);
    const Vec2 p(3.0, -7.0);
    const Vec2 expected(2.0 * 3.0 + 0.5 * -7.0 + 10.0, -0.25 * 3.0 + 1.5 * -7.0 - 3.0);
    CHECK((reproject_one(h, p) - expected).norm() < 1e-14);
}

TEST_CASE("reproject matches project_ideal through H = A E") {
    const GroundTruthScene scene = pose1_scene();
    const Homography h = Homography::from_matrix(pose1_exact_homography());
    for (const Vec2& pw : grid_mm(5, 5, 11.0)) {
        const Vec2 via_h = reproject_one(h, pw);
        const Vec2 via_projection = project_ideal(pw, scene.intrinsics, scene.pose);
        CHECK((via_h - via_projection).norm() < 1e-9);
    }
}

TEST_CASE("extrinsics recovery from an exact homography") {
    const GroundTruthScene scene = pose1_scene();
    const Homography h = Homography::from_matrix(pose1_exact_homography());
    const PoseParams pose = extrinsics_from_homography(h, scene.intrinsics);
    CHECK((pose.theta - scene.pose.theta).norm() < 1e-8);
    CHECK((pose.t - scene.pose.t).norm() < 1e-8);
}

TEST_CASE("perturbed homography still yields an orthonormal rotation") {
    GaussianRng rng(31);
    const GroundTruthScene scene = pose1_scene();
    Mat3 h = pose1_exact_homography();
    h /= h(2, 2);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h(r, c) *= 1.0 + 0.02 * rng.gaussian();
    const PoseParams pose = extrinsics_from_homography(Homography::from_matrix(h),
                                                       scene.intrinsics);
    const Mat3 rot = rotation_from_axis_angle(pose.theta);
    CHECK((rot.transpose() * rot - Mat3::Identity()).norm() < 1e-12);
    CHECK(pose.t.z() > 0.0);
}

TEST_SUITE_END();
