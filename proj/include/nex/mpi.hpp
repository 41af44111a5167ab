#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nex/basis.hpp"
#include "nex/image.hpp"
#include "nex/nn.hpp"
#include "nex/scene_io.hpp"

namespace nex {

using Rgb = Eigen::Vector3d;

/// Whether a parameter family is an optimized grid or predicted by F.
enum class Mode { explicit_grid, implicit_net };

struct ModelModes {
  Mode alpha = Mode::implicit_net;
  Mode k0 = Mode::explicit_grid;
  Mode coeffs = Mode::implicit_net;

  /// "Im-Ex-Im" style label in (alpha, K0, coefficients) order.
  std::string label() const;
  static ModelModes parse(const std::string& label);
  bool operator==(const ModelModes&) const = default;
};

struct NetworkShape {
  int color_width = 384;
  int color_layers = 6;  // hidden LeakyReLU layers of F
  int basis_width = 64;
  int basis_layers = 3;  // hidden LeakyReLU layers of G
};

/// Bilinear footprint on a grid, with texel (i, j) centered at (i+0.5, j+0.5).
struct BilinearTap {
  std::array<int, 4> texel{};  // flat pixel indices
  std::array<double, 4> weight{};
};

/// Samples are in bounds for 0 <= u <= width, 0 <= v <= height; the half-texel
/// border clamps to the edge texel.
bool in_grid(int width, int height, double u, double v);
BilinearTap bilinear_tap(int width, int height, double u, double v);
void sample_grid(const Image& grid, const BilinearTap& tap, std::span<double> out);

struct MpiModel {
  Camera reference;
  PlaneStack planes;
  int sharing = 1;  ///< M
  BasisConfig basis;
  ModelModes modes;
  NetworkShape shape;
  PositionNorms norms;
  double alpha_bias_init = -5.0;

  Mlp color_net;  ///< F: encoded (x, y, d) -> [alpha][k0 rgb][coefficients 3N]
  Mlp basis_net;  ///< G: encoded (v_x, v_y) -> N basis values (learned family only)

  std::vector<Image> k0;          ///< per group, 3 channels (explicit K0)
  std::vector<Image> alpha_grid;  ///< per plane, 1 channel of logits (explicit alpha)
  std::vector<Image> coeff_grid;  ///< per group, 3N channels, basis-major (explicit coefficients)

  int plane_count() const { return planes.size(); }
  int group_count() const { return plane_count() / sharing; }
  int coeff_count() const { return basis.count; }
  int group_of(int plane) const { return plane / sharing; }
  /// Center plane of a group (0-based): g*M + ceil(M/2) - 1.
  int representative(int group) const { return group * sharing + (sharing + 1) / 2 - 1; }
  int width() const { return reference.width; }
  int height() const { return reference.height; }

  bool uses_color_net() const;
  bool uses_basis_net() const { return basis.family == BasisFamily::learned && basis.count > 0; }
  /// F output layout; -1 when the family is not implicit.
  int alpha_channel() const;
  int k0_offset() const;
  int coeff_offset() const;
  int color_outputs() const;
  bool needs_shared_query() const {
    return modes.k0 == Mode::implicit_net || (modes.coeffs == Mode::implicit_net && coeff_count() > 0);
  }

  /// All trainable tensors. Group 0 = base color and explicit grids, group 1 = networks.
  std::vector<ParamView> parameters();
  void validate() const;
};

inline constexpr int kGroupBase = 0;
inline constexpr int kGroupNets = 1;

struct ModelOptions {
  int planes = 8;
  PlaneSpacing spacing = PlaneSpacing::inverse_depth;
  int sharing = 4;
  BasisConfig basis = BasisConfig::make(BasisFamily::learned, 8);
  ModelModes modes;
  NetworkShape shape;
  double alpha_bias_init = -5.0;
  /// Pixels added on every side of the reference frustum so that nearby
  /// views stay covered.
  int margin = 0;
  std::uint64_t seed = 0;
};

MpiModel make_model(const Camera& reference, double near, double far, const ModelOptions& opts);

struct PixelQuery {
  double x = 0.0;      ///< continuous reference-image coordinate
  double y = 0.0;
  int plane = 0;       ///< 0-based, back to front
  double plane_index;  ///< continuous index fed to F (jittered when stochastic)
  Eigen::Vector3d view = Eigen::Vector3d::UnitZ();

  PixelQuery(double x_, double y_, int plane_) : x(x_), y(y_), plane(plane_), plane_index(plane_) {}
};

struct PlaneValues {
  double alpha = 0.0;
  Rgb k0 = Rgb::Zero();
  std::vector<double> coeffs;  ///< N x 3, basis-major
};

/// Alpha, base color and coefficients of one plane. Coefficients (and an
/// implicit K0) are evaluated at the group's representative plane.
PlaneValues query_alpha_coeffs(const MpiModel& model, const PixelQuery& q);

/// Representative continuous plane index for coefficient queries given the
/// per-plane indices actually used (jittered or not).
double representative_index(const MpiModel& model, int plane, std::span<const double> plane_indices);

/// k0 + sum_n coeffs[n] * basis[n], unclamped.
Rgb pixel_color(const Rgb& k0, std::span<const double> coeffs, std::span<const double> basis);

/// Back-to-front inputs; evaluated front to back with running transmittance.
Rgb composite(std::span<const double> alphas, std::span<const Rgb> colors);
/// alpha_d * prod_{i > d} (1 - alpha_i), 0-based back-to-front index.
double transmittance(std::span<const double> alphas, int d);

/// Basis values at a reference-frame viewing direction.
std::vector<double> basis_values(const MpiModel& model, const Eigen::Vector3d& view);

}  // namespace nex
