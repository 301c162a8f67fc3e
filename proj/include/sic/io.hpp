#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sic/pipeline.hpp"
#include "sic/synth.hpp"
#include "sic/types.hpp"

namespace sic {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);
// Fixed 6-significant-digit display for reports.
std::string format_report(double value);

// FNV-1a 64-bit over the raw bytes, "fnv1a:" + 16 hex digits.
std::string digest_bytes(std::span<const char> bytes);
std::string digest_file(const std::filesystem::path& path);

// CorrespondenceFile CSV: header x_d,y_d,X,Y[,x,y], LF endings.
void write_correspondences(const std::filesystem::path& path, const CorrespondenceSet& set);
CorrespondenceSet read_correspondences(const std::filesystem::path& path);

// RadialCurve CSV: header r_d,r_u. The COD travels in comment-free sidecars
// or the report; the curve file itself is plain columns.
void write_curve(const std::filesystem::path& path, const RadialCurve& curve);
// cod must be supplied by the caller (the curve file stores only radii).
RadialCurve read_curve(const std::filesystem::path& path, const Vec2& cod);

// Disparity CSV: header x_d,y_d,d_tot.
void write_disparity(const std::filesystem::path& path, std::span<const Vec2> points,
                     std::span<const double> d_tot);

// Sweep CSV: header sigma,mode,parameter,mean_error,std_error,n_ok,n_fail.
void write_sweep(const std::filesystem::path& path, const SweepTable& table);

// Ordered key = value document; round-trips byte-identically.
class Report {
  public:
    void set(const std::string& key, const std::string& value);
    void set_number(const std::string& key, double value);
    const std::string* find(const std::string& key) const;

    std::string serialize() const;
    static Report parse(const std::string& text);

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Stage-keyed calibration report (Table-style rows, degrees and mm).
Report build_calibration_report(const PipelineResult& result, const SensorSpec& sensor,
                                const PipelineConfig& config, const std::string& input_digest);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace sic
