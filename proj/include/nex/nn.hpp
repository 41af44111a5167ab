#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace nex {

inline constexpr double kLeakySlope = 0.01;

enum class Activation { linear, leaky_relu, sigmoid, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

// ---------------------------------------------------------------------------
// Positional encoding

/// [sin(2^0 (pi/2) u), cos(2^0 (pi/2) u), ..., sin(2^(K-1) (pi/2) u), cos(...)].
std::vector<double> positional_encode(double u, int frequencies);
void positional_encode_into(double u, int frequencies, std::span<double> out);

/// Per-channel affine map of a raw range onto [-1, 1].
struct InputRange {
  double lo = -1.0;
  double hi = 1.0;
  double normalize(double u) const { return hi == lo ? 0.0 : 2.0 * (u - lo) / (hi - lo) - 1.0; }
};

struct PositionNorms {
  InputRange x, y, d;
};

inline constexpr int kPositionFreqXY = 10;
inline constexpr int kPositionFreqD = 8;
inline constexpr int kViewFreq = 3;
inline constexpr int kPositionEncodingDim = 2 * (2 * kPositionFreqXY + kPositionFreqD);  // 56
inline constexpr int kViewEncodingDim = 2 * 2 * kViewFreq;                                 // 12

std::vector<double> encode_position(double x, double y, double d, const PositionNorms& norms);
void encode_position_into(double x, double y, double d, const PositionNorms& norms, std::span<double> out);
/// View directions are already in [-1, 1] and are encoded unnormalized.
std::vector<double> encode_view(double vx, double vy);
void encode_view_into(double vx, double vy, std::span<double> out);

// ---------------------------------------------------------------------------
// Multilayer perceptron

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::leaky_relu;
};

struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  Eigen::MatrixXd output;
};

struct MlpGradient {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
  MlpGradient& operator+=(const MlpGradient& o);
};

class Mlp {
 public:
  Mlp() = default;
  /// `dims` = {in, hidden..., out}. Hidden layers use `hidden`, the last
  /// layer `head`. Weights are Glorot-uniform, biases zero.
  Mlp(const std::vector<int>& dims, Activation hidden, Activation head, std::mt19937_64& rng);

  int input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }
  bool empty() const { return layers_.empty(); }

  /// Overrides the head activation for individual output channels.
  void set_head_activation(int channel, Activation a);
  Activation head_activation(int channel) const;

  /// Columns of `input` are independent samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, MlpCache* cache = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  /// Accumulates parameter gradients into `grads` and returns the gradient
  /// wrt the input (skipped, returning an empty matrix, when `want_input` is false).
  Eigen::MatrixXd backward(const MlpCache& cache, const Eigen::MatrixXd& grad_output, MlpGradient& grads,
                           bool want_input = true) const;

  MlpGradient zero_gradient() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const std::vector<Activation>& head_overrides() const { return head_; }
  void set_head_overrides(std::vector<Activation> h) { head_ = std::move(h); }
  std::size_t parameter_count() const;

 private:
  void activate_head(Eigen::MatrixXd& z) const;
  std::vector<DenseLayer> layers_;
  std::vector<Activation> head_;  // per output channel
};

// ---------------------------------------------------------------------------
// Adam

/// Non-owning view of one named parameter tensor.
struct ParamView {
  std::string name;
  int group = 0;
  std::span<double> values;
  std::vector<int> shape;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void reset(std::span<const ParamView> params);
};

/// One bias-corrected Adam update. `group_lr[p.group]` is the learning rate
/// of each tensor. Throws std::runtime_error naming the group on a NaN gradient.
void adam_step(AdamState& state, std::span<const ParamView> params, std::span<const std::span<const double>> grads,
               std::span<const double> group_lr, std::span<const std::string> group_names = {});

inline constexpr int kDecayEpochs = 1333;

/// base_lr * 0.1^floor(epoch / decay_epochs).
double lr_schedule(double base_lr, long epoch, long decay_epochs = kDecayEpochs);

}  // namespace nex
