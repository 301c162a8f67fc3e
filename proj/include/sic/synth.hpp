#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "sic/pipeline.hpp"
#include "sic/types.hpp"

namespace sic {

// Ground truth for a synthetic capture: camera, pose, distortion, sensor,
// and the sparse-target grid geometry.
struct GroundTruthScene {
    CameraIntrinsics intrinsics;
    PoseParams pose;
    RadialDistortion distortion;
    SensorSpec sensor;
    double target_pitch_mm = 5.28;
    int grid_cols = 13;
    int grid_rows = 10;
};

struct NoiseSpec {
    double sigma = 0.0;  // px standard deviation on detected points
    std::uint64_t seed = 0;
    bool allow_large_sigma = false;  // lift the sigma <= 1 sweep-range guard
};

// Seedable portable Gaussian generator: mt19937_64 + Box-Muller, so fixtures
// reproduce across implementations.
class GaussianRng {
  public:
    explicit GaussianRng(std::uint64_t seed) : gen_(seed) {}

    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// The dense illustrative scene (pose #1).
GroundTruthScene pose1_scene();

// Grid spacing that makes the pose-#1 dense grid hold exactly 126505 points.
extern const double kPose1DenseSpacingPx;

// The 20-pose sparse-target set; pose #1 is pinned to the dense scene's
// extrinsics, the rest are drawn from a fixed seed.
std::vector<GroundTruthScene> poses20_scenes();

// Regular grid of ideal image points covering the sensor (with margin),
// inverted through the exact homography to target coordinates and pushed
// through the distortion; only points whose distorted image lands inside the
// sensor are kept. The ideal column is filled.
CorrespondenceSet generate_dense_grid(const GroundTruthScene& scene, double spacing_px);

// Sparse ZM-style sets: the scene's grid_cols x grid_rows target grid
// (centered on the world origin) projected per pose.
std::vector<CorrespondenceSet> generate_pose_set(std::span<const GroundTruthScene> scenes);

// i.i.d. Gaussian offsets on the detected points only; deterministic per seed.
CorrespondenceSet add_noise(const CorrespondenceSet& set, const NoiseSpec& noise);

struct SweepCell {
    double sigma = 0.0;
    int trial = 0;
    PipelineMode mode = PipelineMode::ModelBased;
    bool ok = false;
    std::string error;
    // Signed parameter errors vs ground truth plus derived metrics.
    double fx_error = 0.0;
    double fy_error = 0.0;
    double u0_error = 0.0;
    double v0_error = 0.0;
    double k1_error = 0.0;  // model-based cells only
    double k2_error = 0.0;
    double k3_error = 0.0;
    double gt_disparity = 0.0;      // mean ||ideal - undistorted(detected)||
    double curve_offset = 0.0;      // model-free displacement minus model-based, px
};

struct SweepRow {
    double sigma = 0.0;
    std::string mode;
    std::string parameter;
    double mean_error = 0.0;
    double std_error = 0.0;
    int n_ok = 0;
    int n_fail = 0;
};

struct SweepTable {
    std::vector<SweepCell> cells;
    std::vector<SweepRow> rows;
};

struct SweepOptions {
    std::vector<double> sigmas;
    int trials_per_sigma = 10;
    std::vector<PipelineMode> modes = {PipelineMode::ModelBased, PipelineMode::ModelFree};
    double spacing_px = 24.0;
    std::uint64_t base_seed = 20240601;
    // Model-free slack: epsilon = epsilon_sigma_factor * sigma (known noise).
    double epsilon_sigma_factor = 3.5;
};

// Generate, perturb, calibrate for every (sigma, trial, mode) cell; failures
// are recorded per cell and the sweep continues.
SweepTable run_noise_sweep(const GroundTruthScene& scene, const SweepOptions& options);

}  // namespace sic
