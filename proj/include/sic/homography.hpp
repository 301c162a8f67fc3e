#pragma once

#include <span>

#include "sic/types.hpp"

namespace sic {

// Planar homography, normalized so h33 = 1 when |h33| > 1e-12, else to unit
// Frobenius norm. Defined up to scale.
struct Homography {
    Mat3 m = Mat3::Identity();

    static Homography from_matrix(const Mat3& m);
    double at(int row, int col) const { return m(row, col); }
};

enum class DltMethod {
    Auto,             // SVD up to 1e4 points, normal equations beyond
    Svd,              // SVD of the 2n x 9 design matrix
    NormalEquations,  // smallest eigenvector of the 9 x 9 normal matrix
};

// Normalized DLT (Hartley similarity normalization on both point sets).
Homography estimate_homography(std::span<const Vec2> target_mm, std::span<const Vec2> image_px,
                               DltMethod method = DltMethod::Auto);

// Unnormalized DLT; kept for the conditioning regression tests.
Homography estimate_homography_unnormalized(std::span<const Vec2> target_mm,
                                            std::span<const Vec2> image_px);

Vec2 reproject_one(const Homography& h, const Vec2& target_mm);
std::vector<Vec2> reproject(const Homography& h, std::span<const Vec2> target_mm);

// Decomposes H ~ A [r1 r2 t] into extrinsics given intrinsics. The rotation
// is re-orthonormalized to the nearest rotation in Frobenius norm and the
// sign is fixed so that t_z > 0.
PoseParams extrinsics_from_homography(const Homography& h, const CameraIntrinsics& intr);

}  // namespace sic
