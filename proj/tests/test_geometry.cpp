#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sic/geometry.hpp"
#include "sic/synth.hpp"

using namespace sic;

namespace {

// Independent oracle: axis-angle via unit quaternion, matrix from the
// quaternion product formula.
Mat3 quaternion_rotation(const Vec3& theta) {
    const double angle = theta.norm();
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
    if (angle > 0.0) {
        const Vec3 axis = theta / angle;
        w = std::cos(angle / 2.0);
        const double s = std::sin(angle / 2.0);
        x = s * axis.x();
        y = s * axis.y();
        z = s * axis.z();
    }
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("zero rotation gives identity") {
    CHECK((rotation_from_axis_angle(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("quarter turn about z") {
    const Mat3 r = rotation_from_axis_angle(Vec3(0, 0, M_PI / 2));
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((r - expected).norm() < 1e-15);
}

TEST_CASE("pose-1 angles match the quaternion oracle") {
    const Vec3 theta(deg_to_rad(8.0), deg_to_rad(16.0), deg_to_rad(-26.0));
    const Mat3 r = rotation_from_axis_angle(theta);
    CHECK((r - quaternion_rotation(theta)).norm() < 1e-12);
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-14);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("axis-angle round trip over the canonical range") {
    GaussianRng rng(7);
    for (int i = 0; i < 200; ++i) {
        Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
        axis.normalize();
        const double angle = 1e-6 + (M_PI - 0.01 - 1e-6) * rng.uniform01();
        const Vec3 theta = angle * axis;
        const Vec3 back = axis_angle_from_rotation(rotation_from_axis_angle(theta));
        CHECK((back - theta).norm() < 1e-10);
    }
    // Taylor branch near zero.
    const Vec3 tiny(1e-9, -2e-9, 5e-10);
    const Mat3 r = rotation_from_axis_angle(tiny);
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-15);
    CHECK((axis_angle_from_rotation(r) - tiny).norm() < 1e-15);
}

TEST_CASE("optical-axis point maps to the principal point, depth-invariant") {
    const CameraIntrinsics intr{9285.7, 9278.6, 1609.0, 1353.0};
    PoseParams pose;
    pose.t = Vec3(0, 0, 300);
    const Vec2 p1 = project_ideal(Vec2(0, 0), intr, pose);
    CHECK(p1.x() == doctest::Approx(1609.0).epsilon(1e-14));
    CHECK(p1.y() == doctest::Approx(1353.0).epsilon(1e-14));
    pose.t.z() = 150.0;
    const Vec2 p2 = project_ideal(Vec2(0, 0), intr, pose);
    CHECK((p1 - p2).norm() == 0.0);
}

TEST_CASE("projection agrees with the homogeneous matrix-product oracle") {
    const GroundTruthScene scene = pose1_scene();
    const Mat3 rot = rotation_from_axis_angle(scene.pose.theta);
    Mat3 e;
    e.col(0) = rot.col(0);
    e.col(1) = rot.col(1);
    e.col(2) = scene.pose.t;
    const Mat3 h = scene.intrinsics.matrix() * e;

    for (const Vec2 pw : {Vec2(5.28, 0.0), Vec2(-20.0, 13.5), Vec2(0.0, 0.0)}) {
        const Vec3 q = h * Vec3(pw.x(), pw.y(), 1.0);
        const Vec2 oracle(q.x() / q.z(), q.y() / q.z());
        const Vec2 got = project_ideal(pw, scene.intrinsics, scene.pose);
        CHECK((got - oracle).norm() < 1e-12);
    }
}

TEST_CASE("point behind the camera raises NonPositiveDepth") {
    const CameraIntrinsics intr{1000, 1000, 500, 500};
    PoseParams pose;
    pose.t = Vec3(0, 0, -100);
    CHECK_THROWS_AS((void)project_ideal(Vec2(0, 0), intr, pose), Error);
}

TEST_CASE("zero distortion is the identity") {
    const CameraIntrinsics intr{9285.7, 9278.6, 1609.0, 1353.0};
    const RadialDistortion none{};
    const Vec2 p(123.4, 2045.0);
    CHECK((apply_distortion(p, intr, none) - p).norm() == 0.0);
}

TEST_CASE("principal point is the fixed point of the distortion") {
    const CameraIntrinsics intr{9285.7, 9278.6, 1609.0, 1353.0};
    const RadialDistortion dist{-1.3, 8.8, -163.0};
    const Vec2 e(1609.0, 1353.0);
    CHECK((apply_distortion(e, intr, dist) - e).norm() == 0.0);
}

TEST_CASE("radial factor matches the scalar polynomial oracle at r_n = 0.1") {
    // k1 r^2 + k2 r^4 + k3 r^6 at r = 0.1 with the ground-truth coefficients.
    const RadialDistortion dist{-1.3, 8.8, -163.0};
    const double oracle = -1.3 * 1e-2 + 8.8 * 1e-4 - 163.0 * 1e-6;
    CHECK(oracle == doctest::Approx(-0.012283).epsilon(1e-12));
    CHECK(dist.radial_factor(0.01) == doctest::Approx(oracle).epsilon(1e-14));

    // The same factor must show up as the relative radial displacement.
    const CameraIntrinsics intr{9000.0, 9000.0, 1600.0, 1200.0};
    const Vec2 p(1600.0 + 0.1 * 9000.0, 1200.0);  // normalized radius 0.1
    const Vec2 pd = apply_distortion(p, intr, dist);
    const double r_ideal = (p - intr.principal_point()).norm();
    const double r_dist = (pd - intr.principal_point()).norm();
    CHECK((r_dist - r_ideal) / r_ideal == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("radial symmetry at equal normalized radius") {
    const CameraIntrinsics intr{9000.0, 9000.0, 1600.0, 1200.0};
    const RadialDistortion dist{-1.3, 8.8, -163.0};
    GaussianRng rng(11);
    const double rn = 0.15;
    double reference = -1.0;
    for (int i = 0; i < 50; ++i) {
        const double phi = 2.0 * M_PI * rng.uniform01();
        const Vec2 p(1600.0 + rn * 9000.0 * std::cos(phi), 1200.0 + rn * 9000.0 * std::sin(phi));
        const Vec2 pd = apply_distortion(p, intr, dist);
        const double displacement =
            std::abs((pd - intr.principal_point()).norm() - (p - intr.principal_point()).norm());
        if (reference < 0.0)
            reference = displacement;
        else
            CHECK(displacement == doctest::Approx(reference).epsilon(1e-12));
    }
}

TEST_CASE("ideal point, distorted point and the COD are collinear") {
    const GroundTruthScene scene = pose1_scene();
    const Vec2 cod = scene.intrinsics.principal_point();
    GaussianRng rng(13);
    for (int i = 0; i < 500; ++i) {
        const Vec2 p(scene.sensor.width * rng.uniform01(),
                     scene.sensor.height * rng.uniform01());
        const Vec2 pd = apply_distortion(p, scene.intrinsics, scene.distortion);
        const Vec2 a = p - cod;
        const Vec2 b = pd - cod;
        CHECK(std::abs(a.x() * b.y() - a.y() * b.x()) < 1e-9);
    }
}

TEST_CASE("remove_distortion inverts apply_distortion") {
    const GroundTruthScene scene = pose1_scene();
    GaussianRng rng(17);
    for (int i = 0; i < 200; ++i) {
        const Vec2 p(scene.sensor.width * rng.uniform01(),
                     scene.sensor.height * rng.uniform01());
        const Vec2 pd = apply_distortion(p, scene.intrinsics, scene.distortion);
        const Vec2 back = remove_distortion(pd, scene.intrinsics, scene.distortion);
        CHECK((back - p).norm() < 1e-9);
    }
}

TEST_CASE("total disparity basics") {
    const std::vector<Vec2> a{{0, 0}, {1, 2}};
    const std::vector<Vec2> b{{3, 4}, {1, 2}};
    const auto d = total_disparity(a, b);
    CHECK(d[0] == doctest::Approx(5.0));
    CHECK(d[1] == 0.0);
    const std::vector<Vec2> shorter{{0, 0}};
    CHECK_THROWS_AS((void)total_disparity(a, shorter), Error);
}

TEST_SUITE_END();
