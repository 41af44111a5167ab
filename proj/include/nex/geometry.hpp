#pragma once

#include <Eigen/Core>

#include "nex/scene_io.hpp"

namespace nex {

/// Maps target-image homogeneous pixel coordinates to reference-image
/// homogeneous pixel coordinates for the fronto-parallel reference plane at
/// `depth`.
using Homography = Eigen::Matrix3d;

Homography plane_homography(const Camera& ref, const Camera& tgt, double depth);

/// Applies a homography and dehomogenizes.
Eigen::Vector2d apply_homography(const Homography& h, const Eigen::Vector2d& p);

struct PlaneHit {
  Eigen::Vector3d world;      ///< intersection with the plane z = depth of the reference camera
  Eigen::Vector3d ref_point;  ///< same point in reference camera coordinates
  Eigen::Vector2d ref_pixel;  ///< projection into the reference image (continuous, may be out of bounds)
};

PlaneHit ray_plane_point(const Camera& cam, const Eigen::Vector2d& pixel, const Camera& ref, double depth);

/// Unit vector from `cam_center` toward `world_point`.
Eigen::Vector3d viewing_direction(const Eigen::Vector3d& world_point, const Eigen::Vector3d& cam_center);

}  // namespace nex
