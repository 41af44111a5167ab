#include "nex/synth.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "nex/geometry.hpp"

namespace nex {

SceneKind parse_scene_kind(const std::string& s) {
  if (s == "lambertian") return SceneKind::lambertian;
  if (s == "specular") return SceneKind::specular;
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

namespace {

struct Wave {
  double fx, fy, phase, amp;
};

struct Texture {
  std::array<std::array<Wave, 3>, 3> waves;  // per channel
  std::array<double, 3> offset;

  Eigen::Vector3d albedo(double x, double y) const {
    Eigen::Vector3d c;
    for (int ch = 0; ch < 3; ++ch) {
      double v = offset[ch];
      for (const auto& w : waves[ch]) v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
      c[ch] = v;
    }
    return c;
  }
};

Texture make_texture(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(0.6, 1.8), phase(0.0, 2.0 * std::numbers::pi), sgn(-1.0, 1.0);
  Texture t;
  for (int ch = 0; ch < 3; ++ch) {
    t.offset[ch] = 0.38;
    for (auto& w : t.waves[ch]) w = {freq(rng) * (sgn(rng) < 0 ? -1 : 1), freq(rng) * (sgn(rng) < 0 ? -1 : 1),
                                     phase(rng), 0.09};
  }
  return t;
}

double quantize16(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return std::round(c * 65535.0) / 65535.0;
}

}  // namespace

SceneDataset generate_scene(const SynthOptions& opts) {
  if (!(opts.sheen_period > 0.0)) throw std::invalid_argument("sheen period must be positive");
  if (opts.views < 2) throw std::invalid_argument("need at least two views");
  if (opts.width < 2 || opts.height < 2) throw std::invalid_argument("image too small");
  std::mt19937_64 rng(opts.seed);
  const Texture tex = make_texture(rng);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);

  // Forward-facing rig: a cols x rows grid of centers in the z = 0 plane.
  const int cols = 4;
  const int rows = (opts.views + cols - 1) / cols;
  std::vector<Eigen::Vector3d> centers;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols && static_cast<int>(centers.size()) < opts.views; ++c) {
      const double b = opts.baseline;
      const double x = cols > 1 ? b * (-0.5 + static_cast<double>(c) / (cols - 1)) : 0.0;
      const double y = rows > 1 ? 0.5 * b * (-0.5 + static_cast<double>(r) / (rows - 1)) : 0.0;
      centers.emplace_back(x + jitter(rng), y + jitter(rng), 0.0);
    }
  // Held-out views (every 8th) should be interior positions of the rig.
  if (opts.views == 12) {
    std::swap(centers[0], centers[5]);
    std::swap(centers[8], centers[6]);
  }

  SceneDataset ds;
  ds.near = opts.near;
  ds.far = opts.far;
  const double focal = 0.875 * opts.width;
  for (int i = 0; i < opts.views; ++i) {
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = opts.width / 2.0;
    cam.cy = opts.height / 2.0;
    cam.width = opts.width;
    cam.height = opts.height;
    cam.center = centers[i];
    cam.near = opts.near;
    cam.far = opts.far;

    Image img(opts.width, opts.height, 3);
    for (int y = 0; y < opts.height; ++y)
      for (int x = 0; x < opts.width; ++x) {
        const PlaneHit hit = ray_plane_point(cam, {x + 0.5, y + 0.5}, cam, opts.plane_depth);
        // Plane at z = depth in world: the rig does not rotate.
        const Eigen::Vector3d p = hit.world;
        Eigen::Vector3d c = tex.albedo(p.x(), p.y());
        if (opts.kind == SceneKind::specular) {
          const Eigen::Vector3d v = viewing_direction(p, cam.center);
          const double phase = (v.x() - 0.02 + 0.5 * (v.y() + 0.03)) / opts.sheen_period;
          const double sheen = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * phase);
          const double mask = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (1.1 * p.x() + 0.7 * p.y()));
          c += opts.sheen_gain * Eigen::Vector3d(0.42, 0.40, 0.34) * (mask * sheen);
        }
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = quantize16(c[ch]);
      }
    ds.cameras.push_back(cam);
    ds.images.push_back(std::move(img));
    ds.names.push_back("view_" + std::to_string(i) + ".png");
    ds.is_test.push_back(i % 8 == 0);
  }
  ds.reference_index = default_reference(ds.cameras, ds.is_test);
  return ds;
}

}  // namespace nex
