#include "sic/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"
#include "sic/geometry.hpp"
#include "sic/optimize.hpp"

namespace sic {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lower);
    }
    return m;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(std::span<const double> v) {
    MeanStd out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(acc / static_cast<double>(v.size()));
    return out;
}

// Eq.-style collinearity functional: mean distance from the origin of the
// lines through matched centered point pairs.
double collinearity_cost(std::span<const Vec2> image_px, std::span<const Vec2> reprojected,
                         const VecX& p) {
    const double sx = p(0), sy = p(1), u0 = p(2), v0 = p(3), uc = p(4), vc = p(5);
    double sum = 0.0;
    const std::size_t n = image_px.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double xd0 = image_px[i].x() - u0;
        const double yd0 = image_px[i].y() - v0;
        const double xu0 = sx * (reprojected[i].x() - uc);
        const double yu0 = sy * (reprojected[i].y() - vc);
        const double dx = xd0 - xu0;
        const double dy = yd0 - yu0;
        const double den = std::sqrt(dx * dx + dy * dy);
        if (den < 1e-12) continue;  // coincident pair defines no line
        sum += std::abs(xu0 * yd0 - yu0 * xd0) / den;
    }
    return sum / static_cast<double>(n);
}

// Nelder-Mead with shrinking restarts; restarts stop once the optimum is
// stationary between runs.
OptimResult minimize_with_restarts(BoundedProblem problem, const VecX& step0, int runs,
                                   int max_iterations) {
    NelderMeadOptions opt;
    opt.max_iterations = max_iterations;
    opt.tol_f = 1e-12;
    opt.tol_x = 1e-12;
    OptimResult best;
    double shrink = 1.0;
    for (int k = 0; k < runs; ++k) {
        opt.initial_step = step0 * shrink;
        OptimResult r = minimize(problem, opt);
        if (k > 0) {
            const double moved = (r.x - best.x).norm();
            const double gained = best.f - r.f;
            if (moved <= 1e-10 * (1.0 + best.x.norm()) &&
                gained <= 1e-14 * (std::abs(best.f) + 1e-14)) {
                best = r;
                break;
            }
        }
        best = r;
        problem.x0 = r.x;
        shrink *= 0.1;
    }
    return best;
}

struct Step1Internal {
    Step1Params params;
    Homography full_homography;
    std::vector<Vec2> reprojected;
    std::vector<double> disparity;
};

Step1Internal run_step1(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                        const SensorSpec& sensor, const Step1Options& options) {
    sensor.validate();
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "step1: target/image size mismatch");
    const std::size_t n = image_px.size();
    if (n < 1000)
        throw Error(ErrorCode::InsufficientPoints,
                    "step1: the collinearity search requires a dense grid (>= 1000 points, "
                    "got " + std::to_string(n) + ")");

    Step1Internal out;
    out.params.low_density = n < 10000;
    out.full_homography = estimate_homography(target_mm, image_px);
    out.reprojected = reproject(out.full_homography, target_mm);
    out.disparity = total_disparity(out.reprojected, image_px);

    if (median_of(out.disparity) < 0.05)
        throw Error(ErrorCode::DistortionTooSmall,
                    "step1: median total disparity below 0.05 px, the collinearity "
                    "constraint is degenerate");

    Vec2 init = sensor.center();
    if (options.init == Step1Options::Init::DisparityMinimum) {
        // Centroid of the 1% lowest-disparity points in the central third.
        std::vector<std::size_t> central;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& p = image_px[i];
            if (p.x() >= sensor.width / 3.0 && p.x() <= 2.0 * sensor.width / 3.0 &&
                p.y() >= sensor.height / 3.0 && p.y() <= 2.0 * sensor.height / 3.0)
                central.push_back(i);
        }
        if (!central.empty()) {
            const std::size_t keep = std::max<std::size_t>(1, central.size() / 100);
            std::nth_element(central.begin(), central.begin() + (keep - 1), central.end(),
                             [&](std::size_t a, std::size_t b) {
                                 return out.disparity[a] != out.disparity[b]
                                            ? out.disparity[a] < out.disparity[b]
                                            : a < b;
                             });
            Vec2 centroid = Vec2::Zero();
            for (std::size_t k = 0; k < keep; ++k) centroid += image_px[central[k]];
            init = centroid / static_cast<double>(keep);
        }
    }

    BoundedProblem problem;
    problem.x0 = VecX(6);
    problem.x0 << 1.0, 1.0, init.x(), init.y(), init.x(), init.y();
    problem.lower = VecX(6);
    problem.upper = VecX(6);
    problem.lower << 0.5, 0.5, -0.25 * sensor.width, -0.25 * sensor.height, -0.25 * sensor.width,
        -0.25 * sensor.height;
    problem.upper << 2.0, 2.0, 1.25 * sensor.width, 1.25 * sensor.height, 1.25 * sensor.width,
        1.25 * sensor.height;
    problem.objective = [&](const VecX& p) {
        return collinearity_cost(image_px, out.reprojected, p);
    };

    VecX step0(6);
    step0 << 0.08, 0.08, 48.0, 48.0, 48.0, 48.0;
    const OptimResult res = minimize_with_restarts(problem, step0, 5, 2000);

    out.params.sx = res.x(0);
    out.params.sy = res.x(1);
    out.params.u0 = res.x(2);
    out.params.v0 = res.x(3);
    out.params.uc = res.x(4);
    out.params.vc = res.x(5);
    out.params.cc_value = res.f;
    return out;
}

// Eq.-8 focal length estimate from a plane homography and a known principal
// point; valid only when h31*h32 is away from zero.
double focal_from_homography(const Mat3& h, double u0, double v0) {
    const double h31 = h(2, 0), h32 = h(2, 1);
    if (std::abs(h31 * h32) < 1e-12)
        throw Error(ErrorCode::IllPosedPose,
                    "step2: h31*h32 ~ 0 (target plane nearly parallel to the sensor)");
    const double num = (h(0, 0) - u0 * h31) * (h(0, 1) - u0 * h32) +
                       (h(1, 0) - v0 * h31) * (h(1, 1) - v0 * h32);
    return std::sqrt(std::abs(num / (h31 * h32)));
}

struct RadiusPair {
    double r_d;
    double r_u;
};

RadialCurve make_curve(std::vector<RadiusPair> pairs, const Vec2& cod) {
    detail::sort_large(pairs.begin(), pairs.end(), [](const RadiusPair& a, const RadiusPair& b) {
        return a.r_d != b.r_d ? a.r_d < b.r_d : a.r_u < b.r_u;
    });
    RadialCurve curve;
    curve.cod = cod;
    curve.samples.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        curve.samples[i] = {pairs[i].r_d, pairs[i].r_u};
    return curve;
}

}  // namespace

Step1Params step1_estimate_cod(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                               const SensorSpec& sensor, const Step1Options& options) {
    return run_step1(target_mm, image_px, sensor, options).params;
}

Step2Result step2_init(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                       const Vec2& cod, const SensorSpec& sensor) {
    sensor.validate();
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "step2: target/image size mismatch");
    if (!sensor.contains(cod))
        throw Error(ErrorCode::InvalidInput, "step2: center of distortion outside the sensor");

    // Largest circle centered on the COD fully contained in the image; inside
    // it the point density is directionally balanced.
    const double radius =
        std::min(std::min(cod.x(), sensor.width - cod.x()),
                 std::min(cod.y(), sensor.height - cod.y()));
    std::vector<Vec2> sub_target, sub_image;
    for (std::size_t i = 0; i < image_px.size(); ++i) {
        if ((image_px[i] - cod).norm() <= radius) {
            sub_target.push_back(target_mm[i]);
            sub_image.push_back(image_px[i]);
        }
    }
    if (sub_target.size() < 4)
        throw Error(ErrorCode::InsufficientPoints, "step2: inscribed-circle subset too small");

    Step2Result out;
    out.subset_size = sub_target.size();
    out.subset_homography = estimate_homography(sub_target, sub_image);

    const double f = focal_from_homography(out.subset_homography.m, cod.x(), cod.y());
    CameraIntrinsics intr;
    intr.fx = f;
    intr.fy = f;
    intr.u0 = cod.x();
    intr.v0 = cod.y();
    intr.validate();

    out.calibration.stage = Stage::Step2;
    out.calibration.intrinsics = intr;
    out.calibration.pose = extrinsics_from_homography(out.subset_homography, intr);

    // Undistorted estimate for every point, and the first radial curve.
    const std::vector<Vec2> undist = reproject(out.subset_homography, target_mm);
    std::vector<RadiusPair> pairs(image_px.size());
    std::vector<double> disp(image_px.size());
    for (std::size_t i = 0; i < image_px.size(); ++i) {
        pairs[i] = {(image_px[i] - cod).norm(), (undist[i] - cod).norm()};
        disp[i] = (undist[i] - image_px[i]).norm();
    }
    out.curve = make_curve(std::move(pairs), cod);
    const MeanStd d = mean_std(disp);
    out.calibration.rpe_mean = d.mean;
    out.calibration.rpe_std = d.std;
    return out;
}

namespace {

// d(R q)/d(theta) columns, exact for theta != 0 (Gallego & Yezzi form) with a
// first-order branch at the origin.
struct RotationDerivative {
    Mat3 rot;
    Vec3 theta;
    double norm2;
    Vec3 cross_cols[3];  // theta x ((I - R) e_i)

    explicit RotationDerivative(const Vec3& th) : theta(th) {
        rot = rotation_from_axis_angle(th);
        norm2 = th.squaredNorm();
        if (norm2 >= 1e-16) {
            for (int i = 0; i < 3; ++i) {
                Vec3 e = Vec3::Zero();
                e(i) = 1.0;
                cross_cols[i] = th.cross(e - rot.col(i));
            }
        }
    }

    // Columns of d(w)/d(theta) where w = R q.
    Mat3 jacobian_of_rotated(const Vec3& w) const {
        Mat3 j;
        if (norm2 < 1e-16) {
            j.col(0) = Vec3::UnitX().cross(w);
            j.col(1) = Vec3::UnitY().cross(w);
            j.col(2) = Vec3::UnitZ().cross(w);
            return j;
        }
        const Vec3 txw = theta.cross(w);
        for (int i = 0; i < 3; ++i)
            j.col(i) = (theta(i) * txw + cross_cols[i].cross(w)) / norm2;
        return j;
    }
};

struct ModelBasedEval {
    std::span<const Vec2> target;
    std::span<const Vec2> image;

    // Layout: [fx, fy, u0, v0, theta(3), t(3), k1, k2, k3]
    void operator()(const VecX& p, VecX& r, MatX* jac) const {
        const double fx = p(0), fy = p(1), u0 = p(2), v0 = p(3);
        const Vec3 theta = p.segment<3>(4);
        const Vec3 t = p.segment<3>(7);
        const RadialDistortion dist{p(10), p(11), p(12)};

        const RotationDerivative rd(theta);
        const Mat3& rot = rd.rot;
        const std::size_t n = target.size();
        r.resize(2 * static_cast<Eigen::Index>(n));
        if (jac) jac->setZero(2 * static_cast<Eigen::Index>(n), 13);

        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 w = rot.col(0) * target[i].x() + rot.col(1) * target[i].y();
            const Vec3 cam = w + t;
            if (!(cam.z() > 1e-9)) {
                r(2 * i) = 1e6;
                r(2 * i + 1) = 1e6;
                continue;
            }
            const double inv_z = 1.0 / cam.z();
            const double xh = cam.x() * inv_z;
            const double yh = cam.y() * inv_z;
            const double rho = xh * xh + yh * yh;
            const double d = 1.0 + dist.radial_factor(rho);
            r(2 * i) = fx * xh * d + u0 - image[i].x();
            r(2 * i + 1) = fy * yh * d + v0 - image[i].y();
            if (!jac) continue;

            const double dpoly = dist.k1 + rho * (2.0 * dist.k2 + 3.0 * dist.k3 * rho);
            auto& J = *jac;
            const Eigen::Index rx = 2 * static_cast<Eigen::Index>(i);
            const Eigen::Index ry = rx + 1;
            J(rx, 0) = xh * d;
            J(ry, 1) = yh * d;
            J(rx, 2) = 1.0;
            J(ry, 3) = 1.0;
            J(rx, 10) = fx * xh * rho;
            J(rx, 11) = fx * xh * rho * rho;
            J(rx, 12) = fx * xh * rho * rho * rho;
            J(ry, 10) = fy * yh * rho;
            J(ry, 11) = fy * yh * rho * rho;
            J(ry, 12) = fy * yh * rho * rho * rho;

            // Pose block via the chain rule through (xh, yh, rho).
            const Mat3 dw = rd.jacobian_of_rotated(w);
            for (int k = 0; k < 6; ++k) {
                Vec3 dcam;
                if (k < 3)
                    dcam = dw.col(k);
                else
                    dcam = Vec3::Unit(k - 3);
                const double dxh = (dcam.x() - xh * dcam.z()) * inv_z;
                const double dyh = (dcam.y() - yh * dcam.z()) * inv_z;
                const double drho = 2.0 * (xh * dxh + yh * dyh);
                J(rx, 4 + k) = fx * (dxh * d + xh * dpoly * drho);
                J(ry, 4 + k) = fy * (dyh * d + yh * dpoly * drho);
            }
        }
    }
};

void append_bounds_warnings(const VecX& x, const VecX& lo, const VecX& hi,
                            std::vector<std::string>& warnings, const char* stage_name) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double span = hi(i) - lo(i);
        if (span <= 0.0) continue;
        if (x(i) - lo(i) < 1e-9 * span || hi(i) - x(i) < 1e-9 * span) {
            warnings.push_back(std::string(stage_name) + ": parameter " + std::to_string(i) +
                               " is on its bound");
            return;
        }
    }
}

double translation_halfwidth(double t) { return std::max(0.1 * std::abs(t), 0.5); }

}  // namespace

void model_based_residuals(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                           const Eigen::VectorXd& params, Eigen::VectorXd& residuals,
                           Eigen::MatrixXd* jacobian) {
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "model_based_residuals: size mismatch");
    if (params.size() != 13)
        throw Error(ErrorCode::InvalidInput, "model_based_residuals: expected 13 parameters");
    const ModelBasedEval eval{target_mm, image_px};
    eval(params, residuals, jacobian);
}

CalibrationResult step3a_model_based(std::span<const Vec2> target_mm,
                                     std::span<const Vec2> image_px,
                                     const CalibrationResult& init) {
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "step3a: target/image size mismatch");
    init.intrinsics.validate();

    LeastSquaresProblem problem;
    problem.x0 = VecX(13);
    problem.x0 << init.intrinsics.fx, init.intrinsics.fy, init.intrinsics.u0, init.intrinsics.v0,
        init.pose.theta, init.pose.t, 0.0, 0.0, 0.0;
    problem.lower = VecX(13);
    problem.upper = VecX(13);
    const double ang = deg_to_rad(5.0);
    for (int i = 0; i < 2; ++i) {
        problem.lower(i) = 0.95 * problem.x0(i);
        problem.upper(i) = 1.05 * problem.x0(i);
    }
    for (int i = 2; i < 4; ++i) {
        problem.lower(i) = problem.x0(i) - 30.0;
        problem.upper(i) = problem.x0(i) + 30.0;
    }
    for (int i = 4; i < 7; ++i) {
        problem.lower(i) = problem.x0(i) - ang;
        problem.upper(i) = problem.x0(i) + ang;
    }
    for (int i = 7; i < 10; ++i) {
        const double hw = translation_halfwidth(problem.x0(i));
        problem.lower(i) = problem.x0(i) - hw;
        problem.upper(i) = problem.x0(i) + hw;
    }
    const double kb[3] = {50.0, 500.0, 5000.0};
    for (int i = 0; i < 3; ++i) {
        problem.lower(10 + i) = -kb[i];
        problem.upper(10 + i) = kb[i];
    }

    ModelBasedEval eval{target_mm, image_px};
    problem.eval = [&eval](const VecX& p, VecX& r, MatX* j) { eval(p, r, j); };

    LevenbergMarquardtOptions options;
    options.max_iterations = 400;
    options.tol_cost = 1e-16;
    options.tol_step = 1e-14;
    const OptimResult res = least_squares_bounded(problem, options);

    CalibrationResult out;
    out.stage = Stage::Step3A;
    out.intrinsics = {res.x(0), res.x(1), res.x(2), res.x(3)};
    out.pose.theta = res.x.segment<3>(4);
    out.pose.t = res.x.segment<3>(7);
    out.distortion = RadialDistortion{res.x(10), res.x(11), res.x(12)};
    out.warnings = init.warnings;
    append_bounds_warnings(res.x, problem.lower, problem.upper, out.warnings, "step3a");

    VecX r;
    eval(res.x, r, nullptr);
    if (!r.allFinite())
        throw Error(ErrorCode::OptimizationDiverged, "step3a: non-finite residual at optimum");
    std::vector<double> norms(target_mm.size());
    for (std::size_t i = 0; i < target_mm.size(); ++i)
        norms[i] = std::hypot(r(2 * i), r(2 * i + 1));
    const MeanStd stats = mean_std(norms);
    out.rpe_mean = stats.mean;
    out.rpe_std = stats.std;
    return out;
}

namespace {

// Phase-1 state for the model-free refinement: radii about the trial COD with
// the trial homography A(fx, fr*fx, u0, v0) * E(theta, t).
struct ModelFreeObjective {
    std::span<const Vec2> target;
    std::span<const Vec2> image;
    double fx_fixed;

    // Scratch reused across evaluations.
    mutable std::vector<RadiusPair> pairs;

    // Layout: [u0, v0, fr, theta(3), t(3)]
    bool radii(const VecX& p, std::vector<RadiusPair>& out) const {
        const double u0 = p(0), v0 = p(1), fr = p(2);
        const double fx = fx_fixed, fy = fr * fx_fixed;
        const Mat3 rot = rotation_from_axis_angle(Vec3(p.segment<3>(3)));
        const Vec3 t = p.segment<3>(6);
        const std::size_t n = target.size();
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 cam = rot.col(0) * target[i].x() + rot.col(1) * target[i].y() + t;
            if (!(cam.z() > 1e-9)) return false;
            const double inv_z = 1.0 / cam.z();
            const double du = fx * cam.x() * inv_z;   // undistorted point minus COD
            const double dv = fy * cam.y() * inv_z;
            const double rx = image[i].x() - u0;
            const double ry = image[i].y() - v0;
            out[i] = {std::sqrt(rx * rx + ry * ry), std::sqrt(du * du + dv * dv)};
        }
        return true;
    }

    double operator()(const VecX& p) const {
        if (!radii(p, pairs)) return 1e30;
        detail::sort_large(pairs.begin(), pairs.end(),
                           [](const RadiusPair& a, const RadiusPair& b) {
                               return a.r_d != b.r_d ? a.r_d < b.r_d : a.r_u < b.r_u;
                           });
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
            const double d = pairs[i + 1].r_u - pairs[i].r_u;
            m += d * d;
        }
        return m;
    }
};

}  // namespace

CalibrationResult step3b_model_free(std::span<const Vec2> target_mm,
                                    std::span<const Vec2> image_px, const CalibrationResult& init,
                                    const ModelFreeConfig& config) {
    if (target_mm.size() != image_px.size())
        throw Error(ErrorCode::LengthMismatch, "step3b: target/image size mismatch");
    init.intrinsics.validate();
    config.validate();

    // Phase 1: impose monotonicity of the radial curve; fx stays at the
    // Step-#2 value and the focal ratio becomes a design variable.
    ModelFreeObjective objective{target_mm, image_px, init.intrinsics.fx, {}};
    BoundedProblem problem;
    problem.x0 = VecX(9);
    problem.x0 << init.intrinsics.u0, init.intrinsics.v0,
        init.intrinsics.fy / init.intrinsics.fx, init.pose.theta, init.pose.t;
    problem.lower = VecX(9);
    problem.upper = VecX(9);
    for (int i = 0; i < 2; ++i) {
        problem.lower(i) = problem.x0(i) - 30.0;
        problem.upper(i) = problem.x0(i) + 30.0;
    }
    problem.lower(2) = 0.9;
    problem.upper(2) = 1.1;
    const double ang = deg_to_rad(5.0);
    for (int i = 3; i < 6; ++i) {
        problem.lower(i) = problem.x0(i) - ang;
        problem.upper(i) = problem.x0(i) + ang;
    }
    for (int i = 6; i < 9; ++i) {
        const double hw = translation_halfwidth(problem.x0(i));
        problem.lower(i) = problem.x0(i) - hw;
        problem.upper(i) = problem.x0(i) + hw;
    }
    problem.objective = [&objective](const VecX& p) { return objective(p); };

    VecX step0(9);
    step0 << 2.0, 2.0, 1.5e-3, deg_to_rad(0.1), deg_to_rad(0.1), deg_to_rad(0.1),
        0.01 * std::max(std::abs(problem.x0(6)), 1.0),
        0.01 * std::max(std::abs(problem.x0(7)), 1.0),
        0.01 * std::max(std::abs(problem.x0(8)), 1.0);
    const OptimResult res = minimize_with_restarts(problem, step0, 4, 2000);

    std::vector<RadiusPair> pairs;
    if (!objective.radii(res.x, pairs))
        throw Error(ErrorCode::OptimizationDiverged, "step3b: optimum projects behind camera");
    detail::sort_large(pairs.begin(), pairs.end(), [](const RadiusPair& a, const RadiusPair& b) {
        return a.r_d != b.r_d ? a.r_d < b.r_d : a.r_u < b.r_u;
    });

    // Monotonicity check: dips that are deep against the local difference
    // scale mean phase 1 did not produce a single-valued curve.
    {
        std::size_t violations = 0;
        double rms = 0.0;
        for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
            const double d = pairs[i + 1].r_u - pairs[i].r_u;
            rms += d * d;
        }
        rms = std::sqrt(rms / static_cast<double>(pairs.size() - 1));
        const double threshold = -5.0 * rms;
        for (std::size_t i = 0; i + 1 < pairs.size(); ++i)
            if (pairs[i + 1].r_u - pairs[i].r_u < threshold) ++violations;
        if (violations > (pairs.size() - 1) / 100)
            throw Error(ErrorCode::MonotonicityFailed,
                        "step3b: curve still multi-valued after phase 1");
    }

    // Phase 2: tangency scale. Rescaling the curve about the COD is absorbed
    // entirely by the intrinsics (C(S) A E = A' E), so the phase-1 extrinsics
    // carry over unchanged.
    std::vector<double> r_u(pairs.size()), r_d(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        r_d[i] = pairs[i].r_d;
        r_u[i] = pairs[i].r_u;
    }
    double scale = 1.0;
    if (config.variant == ModelFreeConfig::Variant::EpsilonConstraint)
        scale = select_scale_epsilon(r_u, r_d, config.epsilon);
    else
        scale = select_scale_median(r_u, r_d, config.n_prime);

    CalibrationResult out;
    out.stage = Stage::Step3B;
    out.intrinsics.fx = scale * init.intrinsics.fx;
    out.intrinsics.fy = scale * res.x(2) * init.intrinsics.fx;
    out.intrinsics.u0 = res.x(0);
    out.intrinsics.v0 = res.x(1);
    out.pose.theta = res.x.segment<3>(3);
    out.pose.t = res.x.segment<3>(6);
    out.warnings = init.warnings;
    append_bounds_warnings(res.x, problem.lower, problem.upper, out.warnings, "step3b");

    RadialCurve curve;
    curve.cod = {res.x(0), res.x(1)};
    curve.samples.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        curve.samples[i] = {r_d[i], scale * r_u[i]};
    out.curve = std::move(curve);

    // Curve dispersion as the model-free residual figure: spread of the
    // displacement about its binned mean.
    {
        const auto& samples = out.curve->samples;
        const double r_max = samples.back().r_d;
        const int nbins = 200;
        std::vector<double> sum(nbins, 0.0);
        std::vector<int> count(nbins, 0);
        auto bin_of = [&](double r) {
            int b = static_cast<int>(r / std::max(r_max, 1e-12) * nbins);
            return std::min(std::max(b, 0), nbins - 1);
        };
        for (const auto& s : samples) {
            const int b = bin_of(s.r_d);
            sum[b] += s.r_u - s.r_d;
            ++count[b];
        }
        std::vector<double> abs_res(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const int b = bin_of(samples[i].r_d);
            const double mean = count[b] > 0 ? sum[b] / count[b] : 0.0;
            abs_res[i] = std::abs(samples[i].r_u - samples[i].r_d - mean);
        }
        const MeanStd stats = mean_std(abs_res);
        out.rpe_mean = stats.mean;
        out.rpe_std = stats.std;
    }
    return out;
}

UndistortedPoints undistort_points(std::span<const Vec2> points, const RadialCurve& curve) {
    if (curve.samples.empty())
        throw Error(ErrorCode::InvalidInput, "undistort: empty curve");

    // Deduplicate equal r_d by averaging r_u, then demand monotonicity.
    std::vector<double> rd, ru;
    rd.reserve(curve.samples.size() + 1);
    ru.reserve(curve.samples.size() + 1);
    if (curve.samples.front().r_d > 0.0) {
        rd.push_back(0.0);
        ru.push_back(0.0);
    }
    std::size_t i = 0;
    while (i < curve.samples.size()) {
        std::size_t j = i;
        double acc = 0.0;
        while (j < curve.samples.size() && curve.samples[j].r_d == curve.samples[i].r_d)
            acc += curve.samples[j++].r_u;
        if (!rd.empty() && curve.samples[i].r_d < rd.back())
            throw Error(ErrorCode::NonMonotoneCurve, "undistort: r_d not sorted");
        rd.push_back(curve.samples[i].r_d);
        ru.push_back(acc / static_cast<double>(j - i));
        i = j;
    }
    for (std::size_t k = 1; k < ru.size(); ++k)
        if (ru[k] < ru[k - 1] - 1e-9)
            throw Error(ErrorCode::NonMonotoneCurve, "undistort: r_u not monotone");
    if (rd.size() < 2)
        throw Error(ErrorCode::InvalidInput, "undistort: curve needs >= 2 distinct radii");

    UndistortedPoints out;
    out.points.resize(points.size());
    out.extrapolated.assign(points.size(), false);
    const std::size_t last = rd.size() - 1;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const Vec2 delta = points[k] - curve.cod;
        const double r = delta.norm();
        if (r < 1e-12) {
            out.points[k] = points[k];
            continue;
        }
        double target_r;
        if (r > rd[last]) {
            // Linear extrapolation from the last two samples.
            const double slope = (ru[last] - ru[last - 1]) / (rd[last] - rd[last - 1]);
            target_r = ru[last] + slope * (r - rd[last]);
            out.extrapolated[k] = true;
        } else {
            const auto it = std::upper_bound(rd.begin(), rd.end(), r);
            const std::size_t hi = std::min<std::size_t>(
                std::max<std::ptrdiff_t>(it - rd.begin(), 1), last);
            const std::size_t lo = hi - 1;
            const double w = (r - rd[lo]) / (rd[hi] - rd[lo]);
            target_r = ru[lo] + w * (ru[hi] - ru[lo]);
        }
        out.points[k] = curve.cod + delta * (target_r / r);
    }
    return out;
}

PipelineResult run_full_pipeline(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                                 const SensorSpec& sensor, const PipelineConfig& config) {
    PipelineResult out;
    run_full_pipeline_into(out, target_mm, image_px, sensor, config);
    return out;
}

void run_full_pipeline_into(PipelineResult& out, std::span<const Vec2> target_mm,
                            std::span<const Vec2> image_px, const SensorSpec& sensor,
                            const PipelineConfig& config) {
    try {
        Step1Internal s1 = run_step1(target_mm, image_px, sensor, config.step1);
        out.step1 = s1.params;
        out.initial_disparity = std::move(s1.disparity);
        // Table-style row: intrinsics/extrinsics read off the full-set
        // homography at the Step-#1 COD (diagnostic only).
        try {
            const double f1 =
                focal_from_homography(s1.full_homography.m, out.step1.u0, out.step1.v0);
            CameraIntrinsics a1{f1, f1, out.step1.u0, out.step1.v0};
            out.step1_intrinsics = a1;
            out.step1_pose = extrinsics_from_homography(s1.full_homography, a1);
        } catch (const Error&) {
            // Diagnostic row is optional; Step #2 recomputes from the subset.
        }
    } catch (Error& e) {
        e.set_stage(Stage::Step1);
        throw;
    }
    out.last_completed = Stage::Step1;

    try {
        Step2Result s2 = step2_init(target_mm, image_px, out.step1.cod(), sensor);
        if (out.step1.low_density)
            s2.calibration.warnings.push_back("step1: point grid below 1e4 points");
        out.step2 = std::move(s2.calibration);
        out.step2_curve = std::move(s2.curve);
    } catch (Error& e) {
        e.set_stage(Stage::Step2);
        throw;
    }
    out.last_completed = Stage::Step2;

    if (config.mode == PipelineMode::ModelBased) {
        try {
            out.step3 = step3a_model_based(target_mm, image_px, out.step2);
        } catch (Error& e) {
            e.set_stage(Stage::Step3A);
            throw;
        }
    } else {
        try {
            out.step3 = step3b_model_free(target_mm, image_px, out.step2, config.model_free);
        } catch (Error& e) {
            e.set_stage(Stage::Step3B);
            throw;
        }
    }
    out.last_completed = out.step3.stage;
}

}  // namespace sic
