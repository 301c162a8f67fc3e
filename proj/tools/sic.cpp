#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>

#include "sic/analysis.hpp"
#include "sic/geometry.hpp"
#include "sic/io.hpp"
#include "sic/pipeline.hpp"
#include "sic/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitPipeline = 4;
constexpr int kExitCurve = 5;

struct SynthArgs {
    std::string preset = "pose1";
    double spacing = sic::kPose1DenseSpacingPx;
    double sigma = 0.0;
    std::uint64_t seed = 1;
    std::string out;
};

struct CalibrateArgs {
    std::string input;
    std::string sensor;
    std::string mode = "mb";
    double epsilon = -1.0;  // <0 means "median variant"
    int nprime = 200;
    std::string report;
    std::string curve_out;
    std::string disparity_out;
};

struct UndistortArgs {
    std::string points;
    std::string curve;
    std::vector<double> cod;
    std::string out;
};

struct SweepArgs {
    std::vector<double> sigmas;
    int trials = 10;
    std::string mode = "both";
    double spacing = 24.0;
    std::uint64_t seed = 20240601;
    std::string out;
};

sic::Report ground_truth_report(const sic::GroundTruthScene& scene) {
    sic::Report r;
    r.set("sic_report_version", "1");
    r.set("tool_version", sic::kToolVersion);
    r.set("kind", "ground_truth");
    r.set_number("sensor.width_px", scene.sensor.width);
    r.set_number("sensor.height_px", scene.sensor.height);
    r.set_number("fx", scene.intrinsics.fx);
    r.set_number("fy", scene.intrinsics.fy);
    r.set_number("u0", scene.intrinsics.u0);
    r.set_number("v0", scene.intrinsics.v0);
    r.set_number("theta_x_deg", sic::rad_to_deg(scene.pose.theta.x()));
    r.set_number("theta_y_deg", sic::rad_to_deg(scene.pose.theta.y()));
    r.set_number("theta_z_deg", sic::rad_to_deg(scene.pose.theta.z()));
    r.set_number("t_x_mm", scene.pose.t.x());
    r.set_number("t_y_mm", scene.pose.t.y());
    r.set_number("t_z_mm", scene.pose.t.z());
    r.set_number("k1", scene.distortion.k1);
    r.set_number("k2", scene.distortion.k2);
    r.set_number("k3", scene.distortion.k3);
    return r;
}

int run_synth(const SynthArgs& args) {
    if (args.preset == "pose1") {
        const sic::GroundTruthScene scene = sic::pose1_scene();
        sic::CorrespondenceSet set = sic::generate_dense_grid(scene, args.spacing);
        if (args.sigma > 0.0)
            set = sic::add_noise(set, {args.sigma, args.seed, /*allow_large_sigma=*/true});
        sic::write_correspondences(args.out, set);
        sic::Report truth = ground_truth_report(scene);
        truth.set_number("sigma_px", args.sigma);
        truth.set_number("n_points", static_cast<double>(set.size()));
        sic::write_text_file(args.out + ".truth.txt", truth.serialize());
        std::cout << "wrote " << set.size() << " correspondences to " << args.out << "\n";
        return kExitOk;
    }
    // poses20: one sparse file per pose, shared truth sidecar.
    const std::vector<sic::GroundTruthScene> scenes = sic::poses20_scenes();
    const std::vector<sic::CorrespondenceSet> sets = sic::generate_pose_set(scenes);
    const fs::path out(args.out);
    const fs::path stem = out.parent_path() / out.stem();
    sic::Report truth;
    truth.set("sic_report_version", "1");
    truth.set("tool_version", sic::kToolVersion);
    truth.set("kind", "ground_truth_pose_set");
    for (std::size_t k = 0; k < sets.size(); ++k) {
        sic::CorrespondenceSet set = sets[k];
        if (args.sigma > 0.0)
            set = sic::add_noise(
                set, {args.sigma, args.seed + k, /*allow_large_sigma=*/true});
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_pose%02zu", k + 1);
        const fs::path file = stem.string() + suffix + out.extension().string();
        sic::write_correspondences(file, set);
        const sic::Report pose_truth = ground_truth_report(scenes[k]);
        for (const auto& [key, value] : pose_truth.entries())
            if (key != "sic_report_version" && key != "tool_version" && key != "kind")
                truth.set("pose" + std::to_string(k + 1) + "." + key, value);
    }
    sic::write_text_file(args.out + ".truth.txt", truth.serialize());
    std::cout << "wrote " << sets.size() << " pose files with prefix " << stem << "\n";
    return kExitOk;
}

bool parse_sensor(const std::string& text, sic::SensorSpec& sensor) {
    const std::size_t x = text.find('x');
    if (x == std::string::npos) return false;
    try {
        sensor.width = std::stod(text.substr(0, x));
        sensor.height = std::stod(text.substr(x + 1));
    } catch (const std::exception&) {
        return false;
    }
    return sensor.width > 0.0 && sensor.height > 0.0;
}

int run_calibrate(const CalibrateArgs& args) {
    sic::SensorSpec sensor;
    if (!parse_sensor(args.sensor, sensor)) {
        std::cerr << "calibrate: --sensor must be WxH in pixels\n";
        return kExitUsage;
    }
    const sic::CorrespondenceSet set = sic::read_correspondences(args.input);

    sic::PipelineConfig config;
    config.mode = args.mode == "mf" ? sic::PipelineMode::ModelFree : sic::PipelineMode::ModelBased;
    if (args.epsilon >= 0.0) {
        config.model_free.variant = sic::ModelFreeConfig::Variant::EpsilonConstraint;
        config.model_free.epsilon = args.epsilon;
    } else {
        config.model_free.variant = sic::ModelFreeConfig::Variant::MedianConstraint;
        config.model_free.n_prime = args.nprime;
    }

    const std::string digest = sic::digest_file(args.input);
    sic::PipelineResult result;
    int exit_code = kExitOk;
    std::string failure;
    try {
        sic::run_full_pipeline_into(result, set.target, set.image, sensor, config);
    } catch (const sic::Error& e) {
        failure = sic::to_string(e.code()) + " at stage " + sic::to_string(e.stage()) + ": " +
                  e.what();
        std::cerr << "calibrate failed: " << failure << "\n";
        exit_code = kExitPipeline;
    }

    sic::Report report = sic::build_calibration_report(result, sensor, config, digest);
    if (!failure.empty()) report.set("error", failure);
    if (args.report.empty())
        std::cout << report.serialize();
    else
        sic::write_text_file(args.report, report.serialize());

    if (exit_code == kExitOk && !args.curve_out.empty()) {
        const sic::RadialCurve* curve = nullptr;
        sic::RadialCurve model_curve;
        if (result.step3.curve) {
            curve = &*result.step3.curve;
        } else if (result.step3.distortion) {
            // Raw data curve implied by the fitted model: radii of the
            // detected points against their model-undistorted counterparts.
            const sic::Vec2 cod = result.step3.intrinsics.principal_point();
            model_curve.cod = cod;
            std::vector<std::pair<double, double>> pairs;
            pairs.reserve(set.size());
            for (const sic::Vec2& p : set.image) {
                const sic::Vec2 u =
                    sic::remove_distortion(p, result.step3.intrinsics, *result.step3.distortion);
                pairs.emplace_back((p - cod).norm(), (u - cod).norm());
            }
            std::sort(pairs.begin(), pairs.end());
            model_curve.samples.reserve(pairs.size());
            for (const auto& [rd, ru] : pairs) model_curve.samples.push_back({rd, ru});
            curve = &model_curve;
        }
        if (curve) sic::write_curve(args.curve_out, *curve);
    }
    if (exit_code == kExitOk && !args.disparity_out.empty())
        sic::write_disparity(args.disparity_out, set.image, result.initial_disparity);
    return exit_code;
}

int run_undistort(const UndistortArgs& args) {
    const sic::Vec2 cod(args.cod[0], args.cod[1]);
    const sic::RadialCurve curve = sic::read_curve(args.curve, cod);

    // Points file: header x,y.
    const std::string text = sic::read_text_file(args.points);
    std::vector<sic::Vec2> pts;
    {
        std::size_t start = 0;
        bool first = true;
        while (start < text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            std::string line = text.substr(start, end - start);
            start = end + 1;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (first) {
                if (line != "x,y")
                    throw sic::Error(sic::ErrorCode::IoFailure,
                                     "points file must have header x,y");
                first = false;
                continue;
            }
            const std::size_t comma = line.find(',');
            if (comma == std::string::npos)
                throw sic::Error(sic::ErrorCode::IoFailure, "bad points row: " + line);
            pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        }
    }

    const sic::UndistortedPoints result = sic::undistort_points(pts, curve);
    std::string out = "x,y,extrapolated\n";
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        out += sic::format_double(result.points[i].x());
        out += ',';
        out += sic::format_double(result.points[i].y());
        out += ',';
        out += result.extrapolated[i] ? '1' : '0';
        out += '\n';
    }
    sic::write_text_file(args.out, out);
    std::cout << "undistorted " << result.points.size() << " points\n";
    return kExitOk;
}

int run_sweep(const SweepArgs& args) {
    sic::SweepOptions options;
    options.sigmas = args.sigmas;
    options.trials_per_sigma = args.trials;
    options.spacing_px = args.spacing;
    options.base_seed = args.seed;
    if (args.mode == "mb")
        options.modes = {sic::PipelineMode::ModelBased};
    else if (args.mode == "mf")
        options.modes = {sic::PipelineMode::ModelFree};

    const sic::SweepTable table = sic::run_noise_sweep(sic::pose1_scene(), options);
    sic::write_sweep(args.out, table);
    int failures = 0;
    for (const sic::SweepCell& cell : table.cells)
        if (!cell.ok) ++failures;
    std::cout << "sweep complete: " << table.cells.size() << " cells, " << failures
              << " failed\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-image camera calibration from dense planar correspondences"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Generate synthetic correspondence files");
    synth->add_option("--preset", synth_args.preset, "pose1 or poses20")
        ->check(CLI::IsMember({"pose1", "poses20"}));
    synth->add_option("--spacing", synth_args.spacing, "ideal grid spacing, px")
        ->check(CLI::Range(1.0, 1e6));
    synth->add_option("--sigma", synth_args.sigma, "Gaussian noise std, px")
        ->check(CLI::Range(0.0, 1e3));
    synth->add_option("--seed", synth_args.seed, "noise seed");
    synth->add_option("--out", synth_args.out, "output CSV path")->required();

    CalibrateArgs cal_args;
    CLI::App* calibrate = app.add_subcommand("calibrate", "Run the calibration pipeline");
    calibrate->add_option("--input", cal_args.input, "correspondence CSV")->required();
    calibrate->add_option("--sensor", cal_args.sensor, "sensor size WxH, px")->required();
    calibrate->add_option("--mode", cal_args.mode, "mb (model-based) or mf (model-free)")
        ->check(CLI::IsMember({"mb", "mf"}));
    calibrate->add_option("--epsilon", cal_args.epsilon,
                          "model-free slack (px); selects the inequality variant");
    calibrate->add_option("--nprime", cal_args.nprime,
                          "nearest-point count for the median variant")
        ->check(CLI::Range(10, 1000000));
    calibrate->add_option("--report", cal_args.report, "report path (stdout when omitted)");
    calibrate->add_option("--curve-out", cal_args.curve_out, "radial curve CSV");
    calibrate->add_option("--disparity-out", cal_args.disparity_out, "disparity map CSV");

    UndistortArgs und_args;
    CLI::App* undistort = app.add_subcommand("undistort", "Apply a radial curve to points");
    undistort->add_option("--points", und_args.points, "points CSV with header x,y")->required();
    undistort->add_option("--curve", und_args.curve, "radial curve CSV")->required();
    undistort->add_option("--cod", und_args.cod, "center of distortion u,v (px)")
        ->required()
        ->expected(2);
    undistort->add_option("--out", und_args.out, "output CSV path")->required();

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "Noise sweep over the pose-1 scene");
    sweep->add_option("--sigmas", sweep_args.sigmas, "noise levels, px")
        ->required()
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1e3));
    sweep->add_option("--trials", sweep_args.trials, "trials per sigma")
        ->check(CLI::Range(1, 10000));
    sweep->add_option("--mode", sweep_args.mode, "mb, mf, or both")
        ->check(CLI::IsMember({"mb", "mf", "both"}));
    sweep->add_option("--spacing", sweep_args.spacing, "dense grid spacing, px")
        ->check(CLI::Range(1.0, 1e6));
    sweep->add_option("--seed", sweep_args.seed, "base seed");
    sweep->add_option("--out", sweep_args.out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (calibrate->parsed()) return run_calibrate(cal_args);
        if (undistort->parsed()) return run_undistort(und_args);
        if (sweep->parsed()) return run_sweep(sweep_args);
    } catch (const sic::Error& e) {
        std::cerr << "error: " << sic::to_string(e.code()) << ": " << e.what() << "\n";
        switch (e.code()) {
            case sic::ErrorCode::IoFailure: return kExitIo;
            case sic::ErrorCode::NonMonotoneCurve: return kExitCurve;
            case sic::ErrorCode::InvalidInput: return kExitUsage;
            default: return kExitPipeline;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
