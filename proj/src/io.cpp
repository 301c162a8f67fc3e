#include "sic/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sic {

std::string format_double(double value) {
    std::array<char, 64> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

std::string format_report(double value) {
    std::array<char, 64> buf;
    const int n = std::snprintf(buf.data(), buf.size(), "%.6g", value);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

std::string digest_bytes(std::span<const char> bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::array<char, 17> hex;
    std::snprintf(hex.data(), hex.size(), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a:") + hex.data();
}

std::string digest_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    return digest_bytes(std::span<const char>(text.data(), text.size()));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

double parse_field(const std::string& token, const std::filesystem::path& path) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
        throw Error(ErrorCode::IoFailure,
                    "invalid numeric field '" + token + "' in " + path.string());
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
        start = end + 1;
    }
    return lines;
}

}  // namespace

void write_correspondences(const std::filesystem::path& path, const CorrespondenceSet& set) {
    set.validate();
    std::string out;
    out.reserve(set.size() * 48 + 32);
    out += set.has_ideal() ? "x_d,y_d,X,Y,x,y\n" : "x_d,y_d,X,Y\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        out += format_double(set.image[i].x());
        out += ',';
        out += format_double(set.image[i].y());
        out += ',';
        out += format_double(set.target[i].x());
        out += ',';
        out += format_double(set.target[i].y());
        if (set.has_ideal()) {
            out += ',';
            out += format_double(set.ideal[i].x());
            out += ',';
            out += format_double(set.ideal[i].y());
        }
        out += '\n';
    }
    write_text_file(path, out);
}

CorrespondenceSet read_correspondences(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::IoFailure, "empty file: " + path.string());
    const std::string& header = lines.front();
    bool with_ideal = false;
    if (header == "x_d,y_d,X,Y,x,y")
        with_ideal = true;
    else if (header != "x_d,y_d,X,Y")
        throw Error(ErrorCode::IoFailure, "unexpected header in " + path.string());

    CorrespondenceSet set;
    const std::size_t ncols = with_ideal ? 6 : 4;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto fields = split_csv_line(lines[k]);
        if (fields.size() != ncols)
            throw Error(ErrorCode::IoFailure,
                        "row " + std::to_string(k) + " is not rectangular in " + path.string());
        set.image.emplace_back(parse_field(fields[0], path), parse_field(fields[1], path));
        set.target.emplace_back(parse_field(fields[2], path), parse_field(fields[3], path));
        if (with_ideal)
            set.ideal.emplace_back(parse_field(fields[4], path), parse_field(fields[5], path));
    }
    if (set.size() < 4)
        throw Error(ErrorCode::IoFailure, "need >= 4 correspondence rows in " + path.string());
    return set;
}

void write_curve(const std::filesystem::path& path, const RadialCurve& curve) {
    std::string out = "r_d,r_u\n";
    for (const RadialCurveSample& s : curve.samples) {
        out += format_double(s.r_d);
        out += ',';
        out += format_double(s.r_u);
        out += '\n';
    }
    write_text_file(path, out);
}

RadialCurve read_curve(const std::filesystem::path& path, const Vec2& cod) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || lines.front() != "r_d,r_u")
        throw Error(ErrorCode::IoFailure, "unexpected curve header in " + path.string());
    RadialCurve curve;
    curve.cod = cod;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto fields = split_csv_line(lines[k]);
        if (fields.size() != 2)
            throw Error(ErrorCode::IoFailure, "bad curve row in " + path.string());
        curve.samples.push_back({parse_field(fields[0], path), parse_field(fields[1], path)});
    }
    if (curve.samples.empty())
        throw Error(ErrorCode::IoFailure, "curve has no samples: " + path.string());
    return curve;
}

void write_disparity(const std::filesystem::path& path, std::span<const Vec2> points,
                     std::span<const double> d_tot) {
    if (points.size() != d_tot.size())
        throw Error(ErrorCode::LengthMismatch, "write_disparity: size mismatch");
    std::string out = "x_d,y_d,d_tot\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        out += format_double(points[i].x());
        out += ',';
        out += format_double(points[i].y());
        out += ',';
        out += format_double(d_tot[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

void write_sweep(const std::filesystem::path& path, const SweepTable& table) {
    std::string out = "sigma,mode,parameter,mean_error,std_error,n_ok,n_fail\n";
    for (const SweepRow& row : table.rows) {
        out += format_double(row.sigma);
        out += ',';
        out += row.mode;
        out += ',';
        out += row.parameter;
        out += ',';
        out += format_double(row.mean_error);
        out += ',';
        out += format_double(row.std_error);
        out += ',';
        out += std::to_string(row.n_ok);
        out += ',';
        out += std::to_string(row.n_fail);
        out += '\n';
    }
    write_text_file(path, out);
}

void Report::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void Report::set_number(const std::string& key, double value) { set(key, format_report(value)); }

const std::string* Report::find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

std::string Report::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

Report Report::parse(const std::string& text) {
    Report report;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const std::size_t sep = line.find(" = ");
        if (sep == std::string::npos)
            throw Error(ErrorCode::IoFailure, "malformed report line: " + line);
        report.entries_.emplace_back(line.substr(0, sep), line.substr(sep + 3));
    }
    return report;
}

namespace {

void add_stage_block(Report& report, const std::string& prefix, const CalibrationResult& r) {
    report.set_number(prefix + ".fx", r.intrinsics.fx);
    report.set_number(prefix + ".fy", r.intrinsics.fy);
    report.set_number(prefix + ".u0", r.intrinsics.u0);
    report.set_number(prefix + ".v0", r.intrinsics.v0);
    report.set_number(prefix + ".theta_x_deg", rad_to_deg(r.pose.theta.x()));
    report.set_number(prefix + ".theta_y_deg", rad_to_deg(r.pose.theta.y()));
    report.set_number(prefix + ".theta_z_deg", rad_to_deg(r.pose.theta.z()));
    report.set_number(prefix + ".t_x_mm", r.pose.t.x());
    report.set_number(prefix + ".t_y_mm", r.pose.t.y());
    report.set_number(prefix + ".t_z_mm", r.pose.t.z());
    report.set_number(prefix + ".rpe_mean_px", r.rpe_mean);
    report.set_number(prefix + ".rpe_std_px", r.rpe_std);
    if (r.distortion) {
        report.set_number(prefix + ".k1", r.distortion->k1);
        report.set_number(prefix + ".k2", r.distortion->k2);
        report.set_number(prefix + ".k3", r.distortion->k3);
    }
    if (r.curve) report.set(prefix + ".distortion", "radial_curve");
}

}  // namespace

Report build_calibration_report(const PipelineResult& result, const SensorSpec& sensor,
                                const PipelineConfig& config, const std::string& input_digest) {
    Report report;
    report.set("sic_report_version", "1");
    report.set("tool_version", kToolVersion);
    report.set("input_digest", input_digest);
    report.set_number("sensor.width_px", sensor.width);
    report.set_number("sensor.height_px", sensor.height);
    report.set("mode", config.mode == PipelineMode::ModelBased ? "mb" : "mf");
    if (config.mode == PipelineMode::ModelFree) {
        report.set("config.variant",
                   config.model_free.variant == ModelFreeConfig::Variant::EpsilonConstraint
                       ? "epsilon"
                       : "median");
        report.set_number("config.epsilon_px", config.model_free.epsilon);
        report.set_number("config.n_prime", config.model_free.n_prime);
    }

    report.set("last_completed_stage", to_string(result.last_completed));
    if (result.last_completed >= Stage::Step1) {
        report.set_number("step1.sx", result.step1.sx);
        report.set_number("step1.sy", result.step1.sy);
        report.set_number("step1.aspect_ratio", result.step1.aspect_ratio());
        report.set_number("step1.u0", result.step1.u0);
        report.set_number("step1.v0", result.step1.v0);
        report.set_number("step1.uc", result.step1.uc);
        report.set_number("step1.vc", result.step1.vc);
        report.set_number("step1.cc_px", result.step1.cc_value);
        if (result.step1_intrinsics) {
            report.set_number("step1.f_full_grid", result.step1_intrinsics->fx);
            if (result.step1_pose) {
                report.set_number("step1.theta_x_deg", rad_to_deg(result.step1_pose->theta.x()));
                report.set_number("step1.theta_y_deg", rad_to_deg(result.step1_pose->theta.y()));
                report.set_number("step1.theta_z_deg", rad_to_deg(result.step1_pose->theta.z()));
                report.set_number("step1.t_x_mm", result.step1_pose->t.x());
                report.set_number("step1.t_y_mm", result.step1_pose->t.y());
                report.set_number("step1.t_z_mm", result.step1_pose->t.z());
            }
        }
    }
    if (result.step2.stage == Stage::Step2) add_stage_block(report, "step2", result.step2);
    if (result.step3.stage == Stage::Step3A) add_stage_block(report, "step3a", result.step3);
    if (result.step3.stage == Stage::Step3B) add_stage_block(report, "step3b", result.step3);

    std::string warnings;
    auto join = [&warnings](const std::vector<std::string>& list) {
        for (const std::string& w : list) {
            if (!warnings.empty()) warnings += "; ";
            warnings += w;
        }
    };
    join(result.step2.warnings);
    join(result.step3.warnings);
    report.set("warnings", warnings.empty() ? "none" : warnings);
    return report;
}

}  // namespace sic
