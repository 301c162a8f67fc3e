#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace sic {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorCode {
    InvalidInput,
    NonPositiveDepth,
    LengthMismatch,
    InsufficientPoints,
    DegenerateConfiguration,
    BehindCamera,
    NonFiniteObjective,
    InfeasibleBracket,
    NoRoot,
    DistortionTooSmall,
    IllPosedPose,
    OptimizationDiverged,
    MonotonicityFailed,
    NonMonotoneCurve,
    PointOutsideSensor,
    EmptyGrid,
    IoFailure,
};

enum class Stage { None, Step1, Step2, Step3A, Step3B };

std::string to_string(ErrorCode code);
std::string to_string(Stage stage);

// All recoverable failures surface as Error; the stage tag is set by the
// pipeline when a step fails so callers (and the CLI) can report it.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what, Stage stage = Stage::None)
        : std::runtime_error(what), code_(code), stage_(stage) {}

    ErrorCode code() const { return code_; }
    Stage stage() const { return stage_; }
    void set_stage(Stage stage) { stage_ = stage; }

  private:
    ErrorCode code_;
    Stage stage_;
};

// Intrinsic matrix A: focal lengths and principal point, zero skew.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double u0 = 0.0;
    double v0 = 0.0;

    Mat3 matrix() const {
        Mat3 a;
        a << fx, 0.0, u0, 0.0, fy, v0, 0.0, 0.0, 1.0;
        return a;
    }
    // Closed-form inverse (valid because skew is zero).
    Mat3 inverse_matrix() const {
        Mat3 a;
        a << 1.0 / fx, 0.0, -u0 / fx, 0.0, 1.0 / fy, -v0 / fy, 0.0, 0.0, 1.0;
        return a;
    }
    Vec2 principal_point() const { return {u0, v0}; }
    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw Error(ErrorCode::InvalidInput, "intrinsics: focal lengths must be positive");
    }
};

// Extrinsics: axis-angle rotation vector (|theta| = rotation angle, radians)
// plus translation in mm.
struct PoseParams {
    Vec3 theta = Vec3::Zero();
    Vec3 t = Vec3::Zero();
};

// Coefficients of the even 6th-order radial distortion polynomial acting on
// normalized radius powers 2, 4, 6.
struct RadialDistortion {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;

    // k1 r^2 + k2 r^4 + k3 r^6 as a function of r^2.
    double radial_factor(double r2) const { return r2 * (k1 + r2 * (k2 + r2 * k3)); }
};

struct SensorSpec {
    double width = 0.0;
    double height = 0.0;

    Vec2 center() const { return {width / 2.0, height / 2.0}; }
    bool contains(const Vec2& p) const {
        return p.x() >= 0.0 && p.x() <= width && p.y() >= 0.0 && p.y() <= height;
    }
    void validate() const {
        if (!(width > 0.0) || !(height > 0.0))
            throw Error(ErrorCode::InvalidInput, "sensor: dimensions must be positive");
    }
};

// Paired target points p_w (mm, on the Z=0 plane) and detected image points
// p_d (px). Synthetic sets may carry the ideal (undistorted) points as well.
struct CorrespondenceSet {
    std::vector<Vec2> target;
    std::vector<Vec2> image;
    std::vector<Vec2> ideal;  // optional, empty for real data

    std::size_t size() const { return image.size(); }
    bool has_ideal() const { return ideal.size() == image.size() && !ideal.empty(); }
    void validate() const {
        if (target.size() != image.size())
            throw Error(ErrorCode::LengthMismatch, "correspondences: target/image size mismatch");
        if (!ideal.empty() && ideal.size() != image.size())
            throw Error(ErrorCode::LengthMismatch, "correspondences: ideal column size mismatch");
    }
};

inline double deg_to_rad(double deg) { return deg * 0.017453292519943295; }
inline double rad_to_deg(double rad) { return rad * 57.29577951308232; }

}  // namespace sic
