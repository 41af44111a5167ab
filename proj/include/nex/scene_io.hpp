#pragma once

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "nex/image.hpp"

namespace nex {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
/// Inverse depth used in place of zero when a finite depth is needed for the
/// plane at infinity (distance 1/kInverseDepthEpsilon).
inline constexpr double kInverseDepthEpsilon = 1e-6;

/// Pinhole camera. `rotation` is camera-to-world, `center` is the camera
/// position in world units. Camera frame: +x right, +y down, +z forward.
/// Continuous pixel coordinates put the center of pixel (i, j) at (i+0.5, j+0.5).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double near = 1.0, far = kInfinity;

  Eigen::Matrix3d K() const;
  Eigen::Matrix3d K_inverse() const;
};

/// Throws std::invalid_argument naming `name` when a Camera invariant fails.
void validate_camera(const Camera& cam, const std::string& name, double rotation_tol = 1e-6);

/// Reads one camera from a JSON object with the manifest's per-image fields
/// (fx, fy, cx, cy, width, height, rotation, center).
Camera load_camera(const std::filesystem::path& path);

struct SceneDataset {
  std::vector<Camera> cameras;
  std::vector<Image> images;
  std::vector<std::string> names;
  std::vector<bool> is_test;
  int reference_index = 0;
  double near = 1.0;
  double far = kInfinity;

  std::size_t size() const { return cameras.size(); }
  std::vector<int> train_indices() const;
  std::vector<int> test_indices() const;
  const Camera& reference() const { return cameras.at(reference_index); }
};

enum class SplitPolicy { nerf, none };

/// Loads a JSON manifest and the PNG images it names (paths relative to the
/// manifest's directory).
SceneDataset load_scene(const std::filesystem::path& manifest_path);

/// Writes `<dir>/manifest.json` plus one 16-bit PNG per image. Explicit
/// per-image splits are recorded so loading reproduces `is_test`.
void save_scene(const std::filesystem::path& dir, const SceneDataset& scene);

/// Index of the training camera whose center is closest to the centroid of
/// all camera centers.
int default_reference(const std::vector<Camera>& cameras, const std::vector<bool>& is_test);

enum class PlaneSpacing { depth, inverse_depth };

/// Plane depths ordered back (index 0, farthest) to front (index D-1, nearest).
struct PlaneStack {
  std::vector<double> depths;
  PlaneSpacing spacing = PlaneSpacing::inverse_depth;
  double near = 1.0;
  double far = kInfinity;

  int size() const { return static_cast<int>(depths.size()); }
  /// Depth at a continuous plane index, interpolating in the stack's spacing
  /// space. Integer indices reproduce `depths`.
  double depth_at(double index) const;
  /// Finite depth for plane `i`; the plane at infinity maps to 1/epsilon.
  double finite_depth(int i) const { return finite(depths.at(i)); }
  static double finite(double d) { return std::isinf(d) ? 1.0 / kInverseDepthEpsilon : d; }
};

PlaneStack plane_depths(double near, double far, int count, PlaneSpacing mode);

}  // namespace nex
