#pragma once

#include <cstdint>
#include <string>

#include "nex/scene_io.hpp"

namespace nex {

enum class SceneKind { lambertian, specular };

SceneKind parse_scene_kind(const std::string& s);

struct SynthOptions {
  SceneKind kind = SceneKind::lambertian;
  std::uint64_t seed = 7;
  int width = 32;
  int height = 24;
  int views = 12;
  double plane_depth = 2.0;
  double near = 1.0;
  double far = 4.0;
  double baseline = 0.6;      ///< rig width; the height is half of it
  double sheen_period = 0.8;  ///< period of the view-dependent sheen in v_x
  double sheen_gain = 1.0;
};

/// Desk-scale forward-facing capture of one textured fronto-parallel plane.
/// The specular kind adds a sheen that oscillates with the viewing direction,
/// modulated by a surface-locked stripe mask.
/// Pixels are quantized to 16-bit codes so that save/load is lossless.
SceneDataset generate_scene(const SynthOptions& opts);

}  // namespace nex
