#include "sic/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "sic/geometry.hpp"
#include "sic/homography.hpp"
#include "sic/optimize.hpp"

namespace sic {

namespace {

DisparityField field_for(const CorrespondenceSet& set) {
    set.validate();
    const Homography h = estimate_homography(set.target, set.image);
    DisparityField field;
    field.points.assign(set.image.begin(), set.image.end());
    field.d_tot = total_disparity(reproject(h, set.target), set.image);
    field.stats.min = *std::min_element(field.d_tot.begin(), field.d_tot.end());
    field.stats.max = *std::max_element(field.d_tot.begin(), field.d_tot.end());
    double acc = 0.0;
    for (double d : field.d_tot) acc += d;
    field.stats.mean = acc / static_cast<double>(field.d_tot.size());
    return field;
}

}  // namespace

DisparityStudy compare_coverage_regimes(const CorrespondenceSet& dense,
                                        std::span<const CorrespondenceSet> sparse) {
    DisparityStudy study;
    study.dense = field_for(dense);
    double sparse_max = 0.0;
    for (const CorrespondenceSet& set : sparse) {
        study.sparse.push_back(field_for(set));
        sparse_max = std::max(sparse_max, study.sparse.back().stats.max);
    }
    study.contrast_ratio = sparse_max > 0.0
                               ? study.dense.stats.max / sparse_max
                               : std::numeric_limits<double>::infinity();
    return study;
}

CurveScalingFamily curve_scaling_family(const RadialCurve& curve,
                                        std::span<const double> scales) {
    CurveScalingFamily family;
    std::vector<double> r_u(curve.samples.size()), r_d(curve.samples.size());
    for (std::size_t i = 0; i < curve.samples.size(); ++i) {
        r_d[i] = curve.samples[i].r_d;
        r_u[i] = curve.samples[i].r_u;
    }
    for (double s : scales) {
        CurveFamilyMember member;
        member.scale = s;
        member.displacement.reserve(curve.samples.size());
        for (std::size_t i = 0; i < curve.samples.size(); ++i)
            member.displacement.emplace_back(r_d[i], s * r_u[i] - r_d[i]);
        family.members.push_back(std::move(member));
    }
    if (!curve.samples.empty()) {
        bool all_zero = true;
        for (double u : r_u)
            if (u != 0.0) all_zero = false;
        family.tangent_scale = all_zero ? 1.0 : select_scale_epsilon(r_u, r_d, 0.0, 0.25, 4.0);
        for (std::size_t i = 0; i < family.members.size(); ++i) {
            if (family.tangent_index < 0 ||
                std::abs(family.members[i].scale - family.tangent_scale) <
                    std::abs(family.members[family.tangent_index].scale - family.tangent_scale))
                family.tangent_index = static_cast<int>(i);
        }
    }
    return family;
}

}  // namespace sic
