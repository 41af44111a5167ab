#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nex/mpi.hpp"
#include "nex/render.hpp"
#include "nex/scene_io.hpp"

namespace nex {

struct TrainConfig {
  int epochs = 4000;
  int triplets = 2667;  ///< anchors per iteration; 3x as many samples
  double omega = 0.05;  ///< image-gradient loss weight
  double gamma = 0.03;  ///< TV(K0) weight
  double lr_base = 0.01;
  double lr_nets = 0.001;
  long decay_epochs = kDecayEpochs;
  ModelOptions model;
  bool stochastic_depth = false;
  bool gradient_mask = false;  ///< drop gradient-loss terms where the target difference is tiny
  double gradient_mask_threshold = 0.005;
  std::uint64_t seed = 0;
  int workers = 0;     ///< 0 = all available
  int eval_every = 0;  ///< held-out PSNR every this many epochs (0 = only after the last epoch)

  void validate() const;
};

struct TripletBatch {
  /// Integer pixel positions: for triplet t, [3t] anchor, [3t+1] (x+1, y), [3t+2] (x, y+1).
  std::vector<Eigen::Vector2i> pixels;
  int triplets() const { return static_cast<int>(pixels.size() / 3); }
  std::vector<Eigen::Vector2d> centers() const;
};

/// Anchors uniform over [0, W-2] x [0, H-2], without replacement while the
/// count fits; `with_replacement` reports the fallback.
TripletBatch sample_triplets(std::mt19937_64& rng, int width, int height, int count, bool* with_replacement = nullptr);

struct LossValue {
  double loss = 0.0;
  std::vector<Rgb> grad;  ///< dL/dpred per sample
};

struct GradientMask {
  bool enabled = false;
  double threshold = 0.005;
};

/// Mean squared error over all samples and channels plus omega times the mean
/// absolute error of the in-triplet finite differences.
LossValue reconstruction_loss(std::span<const Rgb> pred, std::span<const Rgb> gt, const TripletBatch& batch,
                              double omega, GradientMask mask = {});

/// gamma * sum over grids of [mean |dx| + mean |dy|] over defined differences
/// and channels. Adds gradients into `grads` when provided.
double tv_loss(std::span<const Image> grids, double gamma, std::vector<Image>* grads = nullptr);

struct ObjectiveValue {
  double total = 0.0;
  double reconstruction = 0.0;
  double tv = 0.0;
  std::vector<Rgb> pred;
};

/// Full training objective for one image and batch; accumulates exact
/// gradients into `grad` when provided.
ObjectiveValue evaluate_objective(const MpiModel& model, const Camera& cam, const Image& target,
                                  const TripletBatch& batch, const TrainConfig& cfg,
                                  std::span<const double> plane_indices, ModelGradient* grad);

/// One plane jitter draw: index d + U(-0.5, 0.5), clamped to [0, D-1].
std::vector<double> jitter_planes(std::mt19937_64& rng, int planes);

struct TrainLogRow {
  long iteration = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double heldout_psnr = 0.0;  ///< NaN when not evaluated on this row
};

struct TrainResult {
  MpiModel model;
  AdamState adam;
  std::vector<TrainLogRow> log;
};

using TrainProgress = std::function<void(const TrainLogRow&)>;

TrainResult train(const SceneDataset& dataset, const TrainConfig& cfg, const TrainProgress& progress = {});

void write_log_csv(const std::string& path, std::span<const TrainLogRow> log);

struct ViewScore {
  int index = 0;
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Renders the chosen split and scores it against the dataset images.
std::vector<ViewScore> evaluate_views(const MpiModel& model, const SceneDataset& dataset, bool test_split, int workers);
double mean_psnr(std::span<const ViewScore> scores);
double mean_ssim(std::span<const ViewScore> scores);

struct AblationRow {
  ModelModes modes;
  double psnr = 0.0;
  double ssim = 0.0;
  bool is_default = false;
};

/// Trains every alpha/K0/coefficient Ex/Im combination (Ex-Ex-Ex first,
/// Im-Im-Im last) with `base` and scores the held-out split.
std::vector<AblationRow> ablation_matrix(const SceneDataset& dataset, const TrainConfig& base);
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace nex
