#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "nex/mpi.hpp"

namespace nex {

/// Dense gradient of a scalar objective wrt every MpiModel parameter.
struct ModelGradient {
  MlpGradient color;
  MlpGradient basis;
  std::vector<Image> k0;
  std::vector<Image> alpha_grid;
  std::vector<Image> coeff_grid;

  static ModelGradient zeros_like(const MpiModel& model);
  /// Spans aligned one-to-one with MpiModel::parameters().
  std::vector<std::span<double>> flat();
};

enum class GridFamily : std::uint8_t { k0, alpha, coeff };

struct GridTap {
  GridFamily family;
  std::uint32_t grid;
  std::uint32_t element;
  double value;
};

/// Gradient contribution of one chunk of rays; grid entries are sparse.
struct ChunkGradient {
  MlpGradient color;
  MlpGradient basis;
  std::vector<GridTap> taps;
};

void accumulate(ModelGradient& total, const ChunkGradient& chunk);

/// Differentiable evaluation of a set of rays from one camera through the
/// MPI. Holds everything needed for an exact reverse pass.
class RayBatch {
 public:
  /// `pixels` are continuous coordinates in `cam`. `plane_indices` holds one
  /// continuous index per plane (jittered depth positions) or is empty.
  RayBatch(const MpiModel& model, const Camera& cam, std::span<const Eigen::Vector2d> pixels,
           std::span<const double> plane_indices = {});

  const std::vector<Rgb>& colors() const { return colors_; }
  std::size_t size() const { return colors_.size(); }

  /// Accumulates dL/dparams given dL/dcolor for each ray.
  void backward(std::span<const Rgb> grad_colors, ChunkGradient& out) const;

 private:
  struct Sample {
    bool inside = false;
    BilinearTap tap;
    double alpha = 0.0;
    Rgb k0 = Rgb::Zero();
    Rgb color = Rgb::Zero();
    int alpha_col = -1;
    int shared_col = -1;
    int basis_col = -1;
  };

  const MpiModel* model_;
  int planes_ = 0;
  int n_ = 0;
  std::vector<Sample> samples_;     // ray-major, planes_ per ray
  std::vector<double> coeffs_;      // 3N per sample
  std::vector<double> basis_;       // N per sample
  std::vector<Rgb> colors_;
  MlpCache color_cache_;
  MlpCache basis_cache_;
};

/// Forward/backward over many rays, chunked with a fixed chunk size so that
/// results do not depend on the worker count.
class RayEvaluator {
 public:
  static constexpr std::size_t kChunkRays = 64;

  RayEvaluator(const MpiModel& model, const Camera& cam, std::span<const Eigen::Vector2d> pixels,
               std::span<const double> plane_indices, int workers);

  const std::vector<Rgb>& colors() const { return colors_; }
  void backward(std::span<const Rgb> grad_colors, ModelGradient& total, int workers) const;

 private:
  std::vector<RayBatch> chunks_;
  std::vector<std::size_t> offsets_;
  std::vector<Rgb> colors_;
};

/// Composited color of one ray through pixel `pixel` (continuous) of `cam`.
Rgb render_ray(const MpiModel& model, const Camera& cam, const Eigen::Vector2d& pixel);

/// render_ray at every pixel center, clamped to [0,1]. Rows are distributed
/// over `workers` OpenMP threads (0 = all available); output is identical for
/// any worker count.
Image render_image(const MpiModel& model, const Camera& cam, int workers = 0);
/// Single-threaded reference kept for parity tests and benchmarks.
Image render_image_serial(const MpiModel& model, const Camera& cam);

/// Resamples the plane stack to factor*D planes over the same inverse-depth
/// range, querying F at the new depths. Requires implicit alpha.
MpiModel upsample_planes(const MpiModel& model, int factor);

int resolve_workers(int workers);

}  // namespace nex
