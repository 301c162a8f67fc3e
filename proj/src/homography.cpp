#include "sic/homography.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sic/geometry.hpp"

namespace sic {

namespace {

struct Similarity {
    double scale = 1.0;
    Vec2 offset = Vec2::Zero();

    Vec2 apply(const Vec2& p) const { return (p - offset) * scale; }
    Mat3 matrix() const {
        Mat3 t;
        t << scale, 0.0, -scale * offset.x(), 0.0, scale, -scale * offset.y(), 0.0, 0.0, 1.0;
        return t;
    }
};

// Centroid to the origin, mean distance sqrt(2).
Similarity normalizing_similarity(std::span<const Vec2> pts) {
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    Similarity s;
    s.offset = centroid;
    s.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    return s;
}

void fill_design_rows(const Vec2& pw, const Vec2& pd, Eigen::Matrix<double, 2, 9>& rows) {
    const double x = pw.x(), y = pw.y(), u = pd.x(), v = pd.y();
    rows << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u,  //
        0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
}

Mat3 solve_dlt(std::span<const Vec2> pw, std::span<const Vec2> pd, DltMethod method) {
    const std::size_t n = pw.size();
    const bool use_normal =
        method == DltMethod::NormalEquations || (method == DltMethod::Auto && n > 10000);

    Eigen::Matrix<double, 9, 1> h;
    double degeneracy_ratio = 0.0;
    if (use_normal) {
        Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
        Eigen::Matrix<double, 2, 9> rows;
        for (std::size_t i = 0; i < n; ++i) {
            fill_design_rows(pw[i], pd[i], rows);
            ata.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(
            ata.selfadjointView<Eigen::Lower>());
        h = eig.eigenvectors().col(0);
        // Two vanishing eigenvalues mean a > 1-dimensional nullspace.
        degeneracy_ratio = std::abs(eig.eigenvalues()(1)) / std::max(eig.eigenvalues()(8), 1e-300);
    } else {
        Eigen::MatrixXd a(2 * n, 9);
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Matrix<double, 2, 9> rows;
            fill_design_rows(pw[i], pd[i], rows);
            a.block<2, 9>(2 * static_cast<Eigen::Index>(i), 0) = rows;
        }
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
        h = svd.matrixV().col(8);
        const double s7 = svd.singularValues()(7);
        const double s0 = svd.singularValues()(0);
        degeneracy_ratio = (s7 * s7) / std::max(s0 * s0, 1e-300);
    }
    if (degeneracy_ratio < 1e-20)
        throw Error(ErrorCode::DegenerateConfiguration,
                    "estimate_homography: rank-deficient configuration");

    Mat3 m;
    m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return m;
}

}  // namespace

Homography Homography::from_matrix(const Mat3& m) {
    Homography h;
    if (std::abs(m(2, 2)) > 1e-12)
        h.m = m / m(2, 2);
    else
        h.m = m / m.norm();
    return h;
}

Homography estimate_homography(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                               DltMethod method) {
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "estimate_homography: size mismatch");
    if (target_mm.size() < 4)
        throw Error(ErrorCode::InsufficientPoints, "estimate_homography: need >= 4 points");

    const Similarity tw = normalizing_similarity(target_mm);
    const Similarity td = normalizing_similarity(image_px);
    std::vector<Vec2> pw_n(target_mm.size()), pd_n(image_px.size());
    for (std::size_t i = 0; i < target_mm.size(); ++i) {
        pw_n[i] = tw.apply(target_mm[i]);
        pd_n[i] = td.apply(image_px[i]);
    }
    const Mat3 hn = solve_dlt(pw_n, pd_n, method);
    const Mat3 h = td.matrix().inverse() * hn * tw.matrix();
    if (std::abs(h.determinant()) < 1e-15 * std::pow(h.norm(), 3))
        throw Error(ErrorCode::DegenerateConfiguration, "estimate_homography: singular result");
    return Homography::from_matrix(h);
}

Homography estimate_homography_unnormalized(std::span<const Vec2> target_mm,
                                            std::span<const Vec2> image_px) {
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "estimate_homography: size mismatch");
    if (target_mm.size() < 4)
        throw Error(ErrorCode::InsufficientPoints, "estimate_homography: need >= 4 points");
    return Homography::from_matrix(solve_dlt(target_mm, image_px, DltMethod::Auto));
}

Vec2 reproject_one(const Homography& h, const Vec2& target_mm) {
    const Vec3 q = h.m * Vec3(target_mm.x(), target_mm.y(), 1.0);
    if (std::abs(q.z()) < 1e-12)
        throw Error(ErrorCode::NonPositiveDepth, "reproject: vanishing homogeneous scale");
    return {q.x() / q.z(), q.y() / q.z()};
}

std::vector<Vec2> reproject(const Homography& h, std::span<const Vec2> target_mm) {
    std::vector<Vec2> out(target_mm.size());
    for (std::size_t i = 0; i < target_mm.size(); ++i) out[i] = reproject_one(h, target_mm[i]);
    return out;
}

PoseParams extrinsics_from_homography(const Homography& h, const CameraIntrinsics& intr) {
    intr.validate();
    const Mat3 ainv = intr.inverse_matrix();
    Vec3 a1 = ainv * h.m.col(0);
    Vec3 a2 = ainv * h.m.col(1);
    Vec3 a3 = ainv * h.m.col(2);
    const double norm1 = a1.norm();
    if (norm1 < 1e-15)
        throw Error(ErrorCode::DegenerateConfiguration, "extrinsics: degenerate first column");
    const double lambda = 1.0 / norm1;
    Vec3 r1 = lambda * a1;
    Vec3 r2 = lambda * a2;
    Vec3 t = lambda * a3;
    if (t.z() < 0.0) {
        r1 = -r1;
        r2 = -r2;
        t = -t;
    }
    if (!(t.z() > 0.0))
        throw Error(ErrorCode::BehindCamera, "extrinsics: target plane not in front of camera");

    Mat3 r_raw;
    r_raw.col(0) = r1;
    r_raw.col(1) = r2;
    r_raw.col(2) = r1.cross(r2);
    // Nearest rotation in Frobenius norm.
    Eigen::JacobiSVD<Mat3> svd(r_raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 rot = svd.matrixU() * svd.matrixV().transpose();
    if (rot.determinant() < 0.0) {
        Mat3 u = svd.matrixU();
        u.col(2) *= -1.0;
        rot = u * svd.matrixV().transpose();
    }
    PoseParams pose;
    pose.theta = axis_angle_from_rotation(rot);
    pose.t = t;
    return pose;
}

}  // namespace sic
