#pragma once

#include <optional>
#include <span>

#include "sic/homography.hpp"
#include "sic/types.hpp"

namespace sic {

// Centering (u0,v0,uc,vc) and anisotropic scaling (sx,sy) estimated by the
// collinearity search; (u0,v0) is the center of distortion.
struct Step1Params {
    double sx = 1.0;
    double sy = 1.0;
    double u0 = 0.0;
    double v0 = 0.0;
    double uc = 0.0;
    double vc = 0.0;
    double cc_value = 0.0;       // objective at the optimum
    bool low_density = false;    // fewer than 1e4 points

    double aspect_ratio() const { return sy / sx; }
    Vec2 cod() const { return {u0, v0}; }
};

struct RadialCurveSample {
    double r_d = 0.0;  // distorted radius from the COD, px
    double r_u = 0.0;  // undistorted radius, px
};

// Sorted (r_d, r_u) samples about the COD: the model-free distortion map.
struct RadialCurve {
    std::vector<RadialCurveSample> samples;  // ascending in r_d
    Vec2 cod = Vec2::Zero();
};

struct ModelFreeConfig {
    enum class Variant { EpsilonConstraint, MedianConstraint };
    Variant variant = Variant::MedianConstraint;
    double epsilon = 0.0;  // slack for the inequality variant, px
    int n_prime = 200;     // nearest-point count for the median variant

    void validate() const {
        if (epsilon < 0.0)
            throw Error(ErrorCode::InvalidInput, "model-free config: epsilon must be >= 0");
        if (variant == Variant::MedianConstraint && n_prime < 10)
            throw Error(ErrorCode::InvalidInput, "model-free config: n_prime must be >= 10");
    }
};

struct CalibrationResult {
    Stage stage = Stage::None;
    CameraIntrinsics intrinsics;
    PoseParams pose;
    std::optional<RadialDistortion> distortion;  // model-based payload
    std::optional<RadialCurve> curve;            // model-free payload
    double rpe_mean = 0.0;
    double rpe_std = 0.0;
    std::vector<std::string> warnings;
};

struct Step1Options {
    enum class Init { SensorCenter, DisparityMinimum };
    Init init = Init::SensorCenter;
};

// Step #1: center-of-distortion estimation by minimizing the collinearity
// functional over (sx, sy, u0, v0, uc, vc).
Step1Params step1_estimate_cod(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                               const SensorSpec& sensor, const Step1Options& options = {});

struct Step2Result {
    CalibrationResult calibration;  // stage = Step2
    RadialCurve curve;
    Homography subset_homography;
    std::size_t subset_size = 0;
};

// Step #2: focal length from the inscribed-circle subset homography plus
// extrinsics extraction, and the first radial curve over all points.
Step2Result step2_init(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                       const Vec2& cod, const SensorSpec& sensor);

// Step #3A: joint bounded refinement of the 13 parameters (intrinsics, pose,
// polynomial distortion) by reprojection-error minimization.
CalibrationResult step3a_model_based(std::span<const Vec2> target_mm,
                                     std::span<const Vec2> image_px,
                                     const CalibrationResult& init);

// Residuals (two per point) of the model-based refinement and their analytic
// Jacobian; parameter layout [fx, fy, u0, v0, theta(3), t(3), k1, k2, k3].
// Exposed so gradient checks can compare against finite differences.
void model_based_residuals(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                           const Eigen::VectorXd& params, Eigen::VectorXd& residuals,
                           Eigen::MatrixXd* jacobian);

// Step #3B: monotonicity refinement of the radial curve with fx held fixed,
// then tangency scale selection.
CalibrationResult step3b_model_free(std::span<const Vec2> target_mm,
                                    std::span<const Vec2> image_px, const CalibrationResult& init,
                                    const ModelFreeConfig& config = {});

struct UndistortedPoints {
    std::vector<Vec2> points;
    std::vector<bool> extrapolated;  // radius beyond the sampled range
};

// Moves each point along its ray from the COD so that r_d maps to r_u via
// monotone piecewise-linear interpolation of the curve.
UndistortedPoints undistort_points(std::span<const Vec2> points, const RadialCurve& curve);

enum class PipelineMode { ModelBased, ModelFree };

struct PipelineConfig {
    PipelineMode mode = PipelineMode::ModelBased;
    ModelFreeConfig model_free;
    Step1Options step1;
};

struct PipelineResult {
    Stage last_completed = Stage::None;
    Step1Params step1;
    CalibrationResult step2;
    CalibrationResult step3;
    RadialCurve step2_curve;
    // Table-style extras for the report: intrinsics/extrinsics extracted from
    // the full-set homography at the Step #1 COD.
    std::optional<CameraIntrinsics> step1_intrinsics;
    std::optional<PoseParams> step1_pose;
    std::vector<double> initial_disparity;  // ||H_d p_w - p_d|| over all points
};

// Step #1 -> Step #2 -> Step #3A or #3B. Stage failures carry the stage tag.
PipelineResult run_full_pipeline(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                                 const SensorSpec& sensor, const PipelineConfig& config = {});

// Same, but fills `result` stage by stage so completed stages survive a
// failure (partial reports).
void run_full_pipeline_into(PipelineResult& result, std::span<const Vec2> target_mm,
                            std::span<const Vec2> image_px, const SensorSpec& sensor,
                            const PipelineConfig& config = {});

}  // namespace sic
