#pragma once

#include <span>

#include "sic/types.hpp"

namespace sic {

Mat3 skew_matrix(const Vec3& v);

// Axis-angle (Rodrigues) vector to rotation matrix. Safe at theta -> 0.
Mat3 rotation_from_axis_angle(const Vec3& theta);

// Inverse conversion; returns the canonical representative with |theta| <= pi.
Vec3 axis_angle_from_rotation(const Mat3& rot);

// Ideal pinhole projection of a target-plane point (Z = 0) to pixels.
// Throws NonPositiveDepth if the point projects from behind the camera.
Vec2 project_ideal(const Vec2& target_mm, const CameraIntrinsics& intr, const PoseParams& pose);

// Same with a precomputed rotation matrix; hot loops hoist the Rodrigues call.
Vec2 project_ideal_r(const Vec2& target_mm, const CameraIntrinsics& intr, const Mat3& rot,
                     const Vec3& t);

// Radial distortion applied to an ideal image point, in pixel coordinates.
// The center of distortion coincides with the principal point.
Vec2 apply_distortion(const Vec2& ideal_px, const CameraIntrinsics& intr,
                      const RadialDistortion& dist);

// Pointwise Euclidean distances ||a_i - b_i||.
std::vector<double> total_disparity(std::span<const Vec2> a, std::span<const Vec2> b);

// Inverts apply_distortion by a Newton solve on the normalized radius.
Vec2 remove_distortion(const Vec2& distorted_px, const CameraIntrinsics& intr,
                       const RadialDistortion& dist);

}  // namespace sic
