#include <doctest.h>

#include <cmath>

#include "sic/analysis.hpp"
#include "sic/synth.hpp"

using namespace sic;

TEST_SUITE_BEGIN("analysis");

TEST_CASE("coverage regimes: dense disparity dwarfs sparse per-pose disparity") {
    const GroundTruthScene scene = pose1_scene();
    const CorrespondenceSet dense = generate_dense_grid(scene, 24.0);
    const auto sparse = generate_pose_set(poses20_scenes());
    const DisparityStudy study = compare_coverage_regimes(dense, sparse);
    CHECK(study.sparse.size() == 20u);
    for (const DisparityField& f : study.sparse)
        CHECK(study.dense.stats.max >= 10.0 * f.stats.max);
    CHECK(study.contrast_ratio >= 10.0);
    CHECK(study.dense.stats.max > study.dense.stats.mean);
}

TEST_CASE("coverage regimes: zero distortion gives near-zero fields") {
    GroundTruthScene scene = pose1_scene();
    scene.distortion = {};
    const CorrespondenceSet dense = generate_dense_grid(scene, 48.0);
    std::vector<GroundTruthScene> scenes{scene};
    const auto sparse = generate_pose_set(scenes);
    const DisparityStudy study = compare_coverage_regimes(dense, sparse);
    CHECK(study.dense.stats.max < 1e-8);
    CHECK(study.sparse[0].stats.max < 1e-8);
}

TEST_CASE("dense disparity minimum sits near the COD") {
    const GroundTruthScene scene = pose1_scene();
    const CorrespondenceSet dense = generate_dense_grid(scene, 24.0);
    std::vector<CorrespondenceSet> no_sparse;
    const DisparityStudy study = compare_coverage_regimes(dense, no_sparse);
    std::size_t imin = 0;
    for (std::size_t i = 1; i < study.dense.d_tot.size(); ++i)
        if (study.dense.d_tot[i] < study.dense.d_tot[imin]) imin = i;
    const Vec2 argmin = study.dense.points[imin];
    CHECK((argmin - scene.intrinsics.principal_point()).norm() < 150.0);
}

TEST_CASE("curve scaling family identifies the tangent member") {
    // Ideal barrel-style curve tangent at the origin for S = 1.
    RadialCurve curve;
    curve.cod = Vec2::Zero();
    for (int i = 1; i <= 800; ++i) {
        const double r_u = 2.5 * i;
        const double x = r_u / 2000.0;
        curve.samples.push_back({r_u * (1.0 - 0.05 * x * x), r_u});
    }
    const std::vector<double> scales{0.96, 0.98, 1.0, 1.02, 1.04};
    const CurveScalingFamily family = curve_scaling_family(curve, scales);
    CHECK(family.members.size() == 5u);
    CHECK(family.tangent_scale == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(family.tangent_index == 2);
    // Tangent member: displacement stays essentially nonnegative and touches zero.
    double min_disp = 1e30;
    for (const Vec2& s : family.members[2].displacement)
        min_disp = std::min(min_disp, s.y());
    CHECK(std::abs(min_disp) < 1e-6);
}

TEST_CASE("curve scaling family of the zero curve is identically zero") {
    RadialCurve curve;
    curve.cod = Vec2::Zero();
    for (int i = 0; i < 10; ++i) curve.samples.push_back({0.0, 0.0});
    const std::vector<double> scales{0.5, 1.0, 2.0};
    const CurveScalingFamily family = curve_scaling_family(curve, scales);
    for (const auto& member : family.members)
        for (const Vec2& s : member.displacement) CHECK(s.y() == 0.0);
}

TEST_SUITE_END();
