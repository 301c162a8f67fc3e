#pragma once

#include <span>

#include "sic/pipeline.hpp"
#include "sic/types.hpp"

namespace sic {

struct DisparityFieldStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

// Per-point homography disparity for one correspondence set.
struct DisparityField {
    std::vector<Vec2> points;      // detected points
    std::vector<double> d_tot;     // ||H p_w - p_d||
    DisparityFieldStats stats;
};

struct DisparityStudy {
    DisparityField dense;
    std::vector<DisparityField> sparse;  // one per pose
    // max(dense D_tot) / max over poses of per-pose max D_tot.
    double contrast_ratio = 0.0;
};

// Contrast between the dense single-image regime and the sparse multi-pose
// regime: each sparse pose fits its own homography (small local disparity),
// the dense set reveals the global distortion field.
DisparityStudy compare_coverage_regimes(const CorrespondenceSet& dense,
                                        std::span<const CorrespondenceSet> sparse);

struct CurveFamilyMember {
    double scale = 0.0;
    // (r_d, scale*r_u - r_d) samples.
    std::vector<Vec2> displacement;
};

struct CurveScalingFamily {
    std::vector<CurveFamilyMember> members;
    double tangent_scale = 0.0;   // scale selected by the tangency criterion
    int tangent_index = -1;       // closest member, -1 if members empty
};

// The family of displacement curves under different scalings of r_u, plus
// the member nearest the tangency-selected scale.
CurveScalingFamily curve_scaling_family(const RadialCurve& curve, std::span<const double> scales);

}  // namespace sic
