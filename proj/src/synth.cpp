#include "sic/synth.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sic/geometry.hpp"

namespace sic {

namespace {

Mat3 plane_homography(const GroundTruthScene& scene) {
    const Mat3 rot = rotation_from_axis_angle(scene.pose.theta);
    Mat3 e;
    e.col(0) = rot.col(0);
    e.col(1) = rot.col(1);
    e.col(2) = scene.pose.t;
    return scene.intrinsics.matrix() * e;
}

std::vector<Vec2> centered_target_grid(const GroundTruthScene& scene) {
    std::vector<Vec2> grid;
    grid.reserve(static_cast<std::size_t>(scene.grid_cols) * scene.grid_rows);
    const double cx = 0.5 * (scene.grid_cols - 1);
    const double cy = 0.5 * (scene.grid_rows - 1);
    for (int j = 0; j < scene.grid_rows; ++j)
        for (int i = 0; i < scene.grid_cols; ++i)
            grid.emplace_back((i - cx) * scene.target_pitch_mm, (j - cy) * scene.target_pitch_mm);
    return grid;
}

}  // namespace

GroundTruthScene pose1_scene() {
    GroundTruthScene s;
    s.intrinsics = {9285.7, 9278.6, 1609.0, 1353.0};
    s.pose.theta = Vec3(deg_to_rad(8.0), deg_to_rad(16.0), deg_to_rad(-26.0));
    s.pose.t = Vec3(5.0, 8.0, 300.0);
    s.distortion = {-1.3, 8.8, -163.0};
    s.sensor = {3264.0, 2448.0};
    return s;
}

// Calibrated so the kept-point count of the pose-#1 grid is 126505.
const double kPose1DenseSpacingPx = 8.2367086410522461;

std::vector<GroundTruthScene> poses20_scenes() {
    std::vector<GroundTruthScene> scenes;
    scenes.push_back(pose1_scene());

    GaussianRng rng(987654321u);
    auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); };
    while (scenes.size() < 20) {
        GroundTruthScene s = pose1_scene();
        const double sign_x = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        const double sign_y = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        s.pose.theta = Vec3(deg_to_rad(sign_x * uniform(5.0, 20.0)),
                            deg_to_rad(sign_y * uniform(6.0, 24.0)),
                            deg_to_rad(uniform(-40.0, 40.0)));
        s.pose.t = Vec3(uniform(-12.0, 12.0), uniform(-10.0, 10.0), uniform(280.0, 420.0));

        // Reject poses that are near fronto-parallel or that push the sparse
        // grid outside the sensor.
        const Mat3 rot = rotation_from_axis_angle(s.pose.theta);
        if (std::abs(rot(2, 0)) < 0.05 || std::abs(rot(2, 1)) < 0.05) continue;
        bool inside = true;
        for (const Vec2& pw : centered_target_grid(s)) {
            const Vec2 pd = apply_distortion(project_ideal_r(pw, s.intrinsics, rot, s.pose.t),
                                             s.intrinsics, s.distortion);
            if (pd.x() < 40.0 || pd.x() > s.sensor.width - 40.0 || pd.y() < 40.0 ||
                pd.y() > s.sensor.height - 40.0) {
                inside = false;
                break;
            }
        }
        if (inside) scenes.push_back(s);
    }
    return scenes;
}

CorrespondenceSet generate_dense_grid(const GroundTruthScene& scene, double spacing_px) {
    scene.intrinsics.validate();
    scene.sensor.validate();
    if (!(spacing_px >= 1.0))
        throw Error(ErrorCode::InvalidInput, "generate_dense_grid: spacing must be >= 1 px");

    const Mat3 h = plane_homography(scene);
    const Mat3 hinv = h.inverse();

    // Ideal points extend 20 spacings beyond the sensor so the distorted
    // image reaches the boundary; with zero distortion the kept set is the
    // exact pixel grid anchored at (0, 0).
    const int margin_steps = 20;
    const int nx =
        static_cast<int>(std::floor(scene.sensor.width / spacing_px)) + 2 * margin_steps + 1;
    const int ny =
        static_cast<int>(std::floor(scene.sensor.height / spacing_px)) + 2 * margin_steps + 1;

    CorrespondenceSet set;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Vec2 ideal((i - margin_steps) * spacing_px, (j - margin_steps) * spacing_px);
            const Vec2 distorted = apply_distortion(ideal, scene.intrinsics, scene.distortion);
            if (!scene.sensor.contains(distorted)) continue;
            const Vec3 q = hinv * Vec3(ideal.x(), ideal.y(), 1.0);
            if (std::abs(q.z()) < 1e-15) continue;
            set.target.emplace_back(q.x() / q.z(), q.y() / q.z());
            set.image.push_back(distorted);
            set.ideal.push_back(ideal);
        }
    }
    if (set.image.empty())
        throw Error(ErrorCode::EmptyGrid, "generate_dense_grid: no points land on the sensor");
    return set;
}

std::vector<CorrespondenceSet> generate_pose_set(std::span<const GroundTruthScene> scenes) {
    std::vector<CorrespondenceSet> sets;
    sets.reserve(scenes.size());
    for (std::size_t k = 0; k < scenes.size(); ++k) {
        const GroundTruthScene& s = scenes[k];
        const Mat3 rot = rotation_from_axis_angle(s.pose.theta);
        CorrespondenceSet set;
        for (const Vec2& pw : centered_target_grid(s)) {
            const Vec2 ideal = project_ideal_r(pw, s.intrinsics, rot, s.pose.t);
            const Vec2 distorted = apply_distortion(ideal, s.intrinsics, s.distortion);
            if (!s.sensor.contains(distorted))
                throw Error(ErrorCode::PointOutsideSensor,
                            "generate_pose_set: pose " + std::to_string(k + 1) +
                                " projects outside the sensor");
            set.target.push_back(pw);
            set.image.push_back(distorted);
            set.ideal.push_back(ideal);
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

CorrespondenceSet add_noise(const CorrespondenceSet& set, const NoiseSpec& noise) {
    set.validate();
    if (noise.sigma < 0.0)
        throw Error(ErrorCode::InvalidInput, "add_noise: sigma must be >= 0");
    if (noise.sigma > 1.0 && !noise.allow_large_sigma)
        throw Error(ErrorCode::InvalidInput,
                    "add_noise: sigma above the [0,1] sweep range (set allow_large_sigma)");
    CorrespondenceSet out = set;
    if (noise.sigma == 0.0) return out;
    GaussianRng rng(noise.seed);
    for (auto& p : out.image) {
        p.x() += noise.sigma * rng.gaussian();
        p.y() += noise.sigma * rng.gaussian();
    }
    return out;
}

namespace {

struct CurveDisplacement {
    // Mean displacement (r_u - r_d) per radial bin over a fixed grid, used to
    // compare model-free and model-based curves on common ground.
    std::vector<double> mean;
    std::vector<int> count;
    double r_max;
    int nbins;

    CurveDisplacement(double r_max_, int nbins_) : mean(nbins_, 0.0), count(nbins_, 0),
                                                   r_max(r_max_), nbins(nbins_) {}

    void add(double r_d, double displacement) {
        int b = static_cast<int>(r_d / r_max * nbins);
        b = std::min(std::max(b, 0), nbins - 1);
        mean[b] += displacement;
        ++count[b];
    }
    void finish() {
        for (int b = 0; b < nbins; ++b)
            if (count[b] > 0) mean[b] /= count[b];
    }
};

}  // namespace

SweepTable run_noise_sweep(const GroundTruthScene& scene, const SweepOptions& options) {
    for (double s : options.sigmas)
        if (s < 0.0) throw Error(ErrorCode::InvalidInput, "sweep: sigma must be >= 0");
    if (options.trials_per_sigma < 1)
        throw Error(ErrorCode::InvalidInput, "sweep: trials must be >= 1");

    const CorrespondenceSet base = generate_dense_grid(scene, options.spacing_px);
    SweepTable table;

    for (std::size_t is = 0; is < options.sigmas.size(); ++is) {
        const double sigma = options.sigmas[is];
        for (int trial = 0; trial < options.trials_per_sigma; ++trial) {
            NoiseSpec noise;
            noise.sigma = sigma;
            noise.seed = options.base_seed + 1000 * is + static_cast<std::uint64_t>(trial);
            const CorrespondenceSet noisy = add_noise(base, noise);

            // Model-based first so the model-free cell can report the curve
            // offset against it on the same data.
            std::optional<CurveDisplacement> mb_curve;
            for (PipelineMode mode : options.modes) {
                SweepCell cell;
                cell.sigma = sigma;
                cell.trial = trial;
                cell.mode = mode;
                try {
                    PipelineConfig config;
                    config.mode = mode;
                    config.model_free.variant = ModelFreeConfig::Variant::EpsilonConstraint;
                    config.model_free.epsilon = options.epsilon_sigma_factor * sigma;
                    const PipelineResult res =
                        run_full_pipeline(noisy.target, noisy.image, scene.sensor, config);

                    cell.ok = true;
                    cell.fx_error = res.step3.intrinsics.fx - scene.intrinsics.fx;
                    cell.fy_error = res.step3.intrinsics.fy - scene.intrinsics.fy;
                    cell.u0_error = res.step3.intrinsics.u0 - scene.intrinsics.u0;
                    cell.v0_error = res.step3.intrinsics.v0 - scene.intrinsics.v0;

                    std::vector<Vec2> undistorted;
                    if (mode == PipelineMode::ModelBased) {
                        const RadialDistortion k = *res.step3.distortion;
                        cell.k1_error = k.k1 - scene.distortion.k1;
                        cell.k2_error = k.k2 - scene.distortion.k2;
                        cell.k3_error = k.k3 - scene.distortion.k3;
                        undistorted.reserve(noisy.image.size());
                        for (const Vec2& p : noisy.image)
                            undistorted.push_back(remove_distortion(p, res.step3.intrinsics, k));
                    } else {
                        undistorted = undistort_points(noisy.image, *res.step3.curve).points;
                    }
                    const std::vector<double> d = total_disparity(base.ideal, undistorted);
                    double acc = 0.0;
                    for (double x : d) acc += x;
                    cell.gt_disparity = acc / static_cast<double>(d.size());

                    // Binned curve displacement for the MF-vs-MB comparison.
                    const double r_max = std::hypot(
                        std::max(scene.intrinsics.u0, scene.sensor.width - scene.intrinsics.u0),
                        std::max(scene.intrinsics.v0, scene.sensor.height - scene.intrinsics.v0));
                    CurveDisplacement disp(r_max, 64);
                    const Vec2 cod = res.step3.intrinsics.principal_point();
                    for (std::size_t i = 0; i < noisy.image.size(); ++i) {
                        const double r_d = (noisy.image[i] - cod).norm();
                        const double r_u = (undistorted[i] - cod).norm();
                        disp.add(r_d, r_u - r_d);
                    }
                    disp.finish();
                    if (mode == PipelineMode::ModelBased) {
                        mb_curve = disp;
                    } else if (mb_curve) {
                        double offset = 0.0;
                        int used = 0;
                        for (int b = 0; b < disp.nbins; ++b) {
                            if (disp.count[b] > 0 && mb_curve->count[b] > 0) {
                                offset += disp.mean[b] - mb_curve->mean[b];
                                ++used;
                            }
                        }
                        cell.curve_offset = used > 0 ? offset / used : 0.0;
                    }
                } catch (const Error& e) {
                    cell.ok = false;
                    cell.error = to_string(e.code()) + "@" + to_string(e.stage());
                } catch (const std::exception& e) {
                    cell.ok = false;
                    cell.error = e.what();
                }
                table.cells.push_back(std::move(cell));
            }
        }
    }

    // Aggregate mean +- std per (sigma, mode, parameter) in fixed order.
    auto aggregate = [&](double sigma, PipelineMode mode, const std::string& name,
                         auto getter) {
        SweepRow row;
        row.sigma = sigma;
        row.mode = mode == PipelineMode::ModelBased ? "mb" : "mf";
        row.parameter = name;
        std::vector<double> values;
        for (const SweepCell& c : table.cells) {
            if (c.sigma != sigma || c.mode != mode) continue;
            if (c.ok)
                values.push_back(getter(c));
            else
                ++row.n_fail;
        }
        row.n_ok = static_cast<int>(values.size());
        if (!values.empty()) {
            double m = 0.0;
            for (double v : values) m += v;
            m /= values.size();
            double s2 = 0.0;
            for (double v : values) s2 += (v - m) * (v - m);
            row.mean_error = m;
            row.std_error = std::sqrt(s2 / values.size());
        }
        table.rows.push_back(std::move(row));
    };

    for (double sigma : options.sigmas) {
        for (PipelineMode mode : options.modes) {
            aggregate(sigma, mode, "fx", [](const SweepCell& c) { return c.fx_error; });
            aggregate(sigma, mode, "fy", [](const SweepCell& c) { return c.fy_error; });
            aggregate(sigma, mode, "u0", [](const SweepCell& c) { return c.u0_error; });
            aggregate(sigma, mode, "v0", [](const SweepCell& c) { return c.v0_error; });
            if (mode == PipelineMode::ModelBased) {
                aggregate(sigma, mode, "k1", [](const SweepCell& c) { return c.k1_error; });
                aggregate(sigma, mode, "k2", [](const SweepCell& c) { return c.k2_error; });
                aggregate(sigma, mode, "k3", [](const SweepCell& c) { return c.k3_error; });
            }
            aggregate(sigma, mode, "gt_disparity",
                      [](const SweepCell& c) { return c.gt_disparity; });
            if (mode == PipelineMode::ModelFree)
                aggregate(sigma, mode, "curve_offset",
                          [](const SweepCell& c) { return c.curve_offset; });
        }
    }
    return table;
}

}  // namespace sic
