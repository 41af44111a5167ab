#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nex/basis.hpp"
#include "nex/image.hpp"
#include "nex/mpi.hpp"
#include "nex/scene_io.hpp"

namespace nex {

inline constexpr int kBakedSchemaMajor = 1;
inline constexpr int kBakedSchemaMinor = 0;

/// Image whose stored unit values u map back via offset + scale * u.
struct QuantizedImage {
  Image image;  ///< quantized unit-range values
  double scale = 0.0;
  double offset = 0.0;
  double value(std::size_t i) const { return offset + scale * image.data[i]; }
};

struct BakedMpi {
  int bits = 8;
  Camera reference;
  std::vector<double> depths;  ///< back to front, finite
  int sharing = 1;
  int coeffs = 0;
  BasisFamily family = BasisFamily::learned;
  double span = 0.7;  ///< basis lookup covers (v_x, v_y) in [-span, span]^2
  int grid = 64;      ///< basis lookup nodes per axis

  std::vector<Image> alpha;                       ///< planes packed 3 per RGB image, plane-major
  std::vector<QuantizedImage> k0;                 ///< per group
  std::vector<std::vector<QuantizedImage>> coef;  ///< [group][basis index], RGB
  Image basis;                                    ///< tiles of 3 basis functions, grid x grid each
  std::vector<double> basis_scale, basis_offset;  ///< per basis function

  int planes() const { return static_cast<int>(depths.size()); }
  int groups() const { return planes() / sharing; }
  double alpha_at(int plane, int texel) const;
  /// Dequantized basis value of function n at lookup node (i, j).
  double basis_node(int n, int i, int j) const;
};

struct BakeOptions {
  double span = 0.7;
  int grid = 64;
  int bits = 8;
  int workers = 0;
};

BakedMpi bake(const MpiModel& model, const BakeOptions& opts = {});

/// Writes manifest.json, alpha_*.png, k0_*.png, coef_g{g}_n{n}.png and basis.png.
void save_baked(const std::filesystem::path& dir, const BakedMpi& baked);
/// Rejects manifests whose schema major version is not kBakedSchemaMajor.
BakedMpi load_baked(const std::filesystem::path& dir);

struct BakedRender {
  Image image;     ///< RGB, clamped
  Image coverage;  ///< 1 channel; 1 where every plane's view direction was inside the span
};

/// CPU reference of the viewer: per-plane homographies, bilinear texture
/// fetches, basis lookup, then front-to-back compositing.
BakedRender render_baked(const BakedMpi& baked, const Camera& cam, int workers = 0);

/// Mean and max absolute channel difference.
struct ImageDiff {
  double mean = 0.0;
  double max = 0.0;
};
ImageDiff image_diff(const Image& a, const Image& b);

}  // namespace nex
