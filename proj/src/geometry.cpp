#include "sic/geometry.hpp"

#include <cmath>

namespace sic {

std::string to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InsufficientPoints: return "InsufficientPoints";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::BehindCamera: return "BehindCamera";
        case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
        case ErrorCode::InfeasibleBracket: return "InfeasibleBracket";
        case ErrorCode::NoRoot: return "NoRoot";
        case ErrorCode::DistortionTooSmall: return "DistortionTooSmall";
        case ErrorCode::IllPosedPose: return "IllPosedPose";
        case ErrorCode::OptimizationDiverged: return "OptimizationDiverged";
        case ErrorCode::MonotonicityFailed: return "MonotonicityFailed";
        case ErrorCode::NonMonotoneCurve: return "NonMonotoneCurve";
        case ErrorCode::PointOutsideSensor: return "PointOutsideSensor";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::None: return "None";
        case Stage::Step1: return "Step1";
        case Stage::Step2: return "Step2";
        case Stage::Step3A: return "Step3A";
        case Stage::Step3B: return "Step3B";
    }
    return "Unknown";
}

Mat3 skew_matrix(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Mat3 rotation_from_axis_angle(const Vec3& theta) {
    const double angle2 = theta.squaredNorm();
    if (angle2 < 1e-16) {
        // Second-order Taylor expansion of the exponential map.
        const Mat3 k = skew_matrix(theta);
        return Mat3::Identity() + k + 0.5 * (k * k);
    }
    const double angle = std::sqrt(angle2);
    const Mat3 k = skew_matrix(theta / angle);
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

Vec3 axis_angle_from_rotation(const Mat3& rot) {
    // Twice the sine-weighted axis, from the antisymmetric part of R.
    const Vec3 w(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));
    const double sin2 = 0.5 * w.norm();
    const double cos2 = 0.5 * (rot.trace() - 1.0);
    const double angle = std::atan2(sin2, cos2);

    if (sin2 < 1e-9) {
        if (cos2 > 0.0) {
            // Near identity: w/2 = sin(angle)*axis, correct by angle/sin(angle).
            return 0.5 * w * (1.0 + angle * angle / 6.0);
        }
        // Near pi: recover the axis from the symmetric part.
        const Mat3 s = 0.5 * (rot + Mat3::Identity());  // = axis*axis^T at angle = pi
        int imax = 0;
        s.diagonal().maxCoeff(&imax);
        Vec3 axis = s.col(imax) / std::sqrt(s(imax, imax));
        // Choose the sign consistent with the (tiny) antisymmetric part.
        if (w.dot(axis) < 0.0) axis = -axis;
        return angle * axis;
    }
    return (0.5 * angle / sin2) * w;
}

Vec2 project_ideal_r(const Vec2& target_mm, const CameraIntrinsics& intr, const Mat3& rot,
                     const Vec3& t) {
    const Vec3 cam = rot.col(0) * target_mm.x() + rot.col(1) * target_mm.y() + t;
    if (!(cam.z() > 0.0))
        throw Error(ErrorCode::NonPositiveDepth, "project_ideal: point behind camera");
    const double inv_z = 1.0 / cam.z();
    return {intr.fx * cam.x() * inv_z + intr.u0, intr.fy * cam.y() * inv_z + intr.v0};
}

Vec2 project_ideal(const Vec2& target_mm, const CameraIntrinsics& intr, const PoseParams& pose) {
    return project_ideal_r(target_mm, intr, rotation_from_axis_angle(pose.theta), pose.t);
}

Vec2 apply_distortion(const Vec2& ideal_px, const CameraIntrinsics& intr,
                      const RadialDistortion& dist) {
    const double xn = (ideal_px.x() - intr.u0) / intr.fx;
    const double yn = (ideal_px.y() - intr.v0) / intr.fy;
    const double f = dist.radial_factor(xn * xn + yn * yn);
    return {intr.fx * (xn + xn * f) + intr.u0, intr.fy * (yn + yn * f) + intr.v0};
}

std::vector<double> total_disparity(std::span<const Vec2> a, std::span<const Vec2> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::LengthMismatch, "total_disparity: length mismatch");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = (a[i] - b[i]).norm();
    return d;
}

Vec2 remove_distortion(const Vec2& distorted_px, const CameraIntrinsics& intr,
                       const RadialDistortion& dist) {
    const double xn_d = (distorted_px.x() - intr.u0) / intr.fx;
    const double yn_d = (distorted_px.y() - intr.v0) / intr.fy;
    const double rd = std::sqrt(xn_d * xn_d + yn_d * yn_d);
    if (rd < 1e-14) return distorted_px;

    // Solve r*(1 + poly(r^2)) = rd for the undistorted normalized radius.
    double r = rd;
    for (int i = 0; i < 50; ++i) {
        const double r2 = r * r;
        const double f = dist.radial_factor(r2);
        const double g = r * (1.0 + f) - rd;
        const double dg = 1.0 + f + r2 * 2.0 * (dist.k1 + r2 * (2.0 * dist.k2 + 3.0 * dist.k3 * r2));
        const double step = g / dg;
        r -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(r))) break;
    }
    const double scale = 1.0 / (1.0 + dist.radial_factor(r * r));
    return {intr.u0 + (distorted_px.x() - intr.u0) * scale,
            intr.v0 + (distorted_px.y() - intr.v0) * scale};
}

}  // namespace sic
