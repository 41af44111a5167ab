#include "nex/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace nex {

namespace {

void check_intrinsics(const Camera& c) {
  if (c.fx == 0.0 || c.fy == 0.0) throw std::invalid_argument("degenerate camera: zero focal length");
}

}  // namespace

Homography plane_homography(const Camera& ref, const Camera& tgt, double depth) {
  check_intrinsics(ref);
  check_intrinsics(tgt);
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw std::invalid_argument("plane depth must be positive and finite");
  // Target camera expressed in the reference frame: X_ref = R_rel X_tgt + t_rel.
  const Eigen::Matrix3d r_rel = ref.rotation.transpose() * tgt.rotation;
  const Eigen::Vector3d t_rel = ref.rotation.transpose() * (tgt.center - ref.center);
  const double offset = depth - t_rel.z();
  if (std::abs(offset) < 1e-12) throw std::invalid_argument("target camera lies on the plane");
  // Points on n.X_ref = depth satisfy n.R_rel X_tgt = offset.
  const Eigen::RowVector3d n_rel = r_rel.row(2);
  const Eigen::Matrix3d m = r_rel + t_rel * n_rel / offset;
  return ref.K() * m * tgt.K_inverse();
}

Eigen::Vector2d apply_homography(const Homography& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

PlaneHit ray_plane_point(const Camera& cam, const Eigen::Vector2d& pixel, const Camera& ref, double depth) {
  check_intrinsics(cam);
  check_intrinsics(ref);
  const Eigen::Vector3d dir_cam = cam.K_inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  const Eigen::Vector3d dir = ref.rotation.transpose() * (cam.rotation * dir_cam);
  const Eigen::Vector3d origin = ref.rotation.transpose() * (cam.center - ref.center);
  if (std::abs(dir.z()) <= 1e-9 * dir.norm())
    throw std::invalid_argument("ray is parallel to the reference plane");
  const double t = (depth - origin.z()) / dir.z();
  PlaneHit hit;
  hit.ref_point = origin + t * dir;
  hit.ref_point.z() = depth;
  hit.world = ref.rotation * hit.ref_point + ref.center;
  hit.ref_pixel = {ref.fx * hit.ref_point.x() / depth + ref.cx, ref.fy * hit.ref_point.y() / depth + ref.cy};
  return hit;
}

Eigen::Vector3d viewing_direction(const Eigen::Vector3d& world_point, const Eigen::Vector3d& cam_center) {
  const Eigen::Vector3d d = world_point - cam_center;
  const double n = d.norm();
  if (!(n > 0.0)) throw std::invalid_argument("viewing direction of zero length");
  return d / n;
}

}  // namespace nex
