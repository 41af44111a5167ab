#include "nex/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nex {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  for (auto a : {Activation::linear, Activation::leaky_relu, Activation::sigmoid, Activation::tanh})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void positional_encode_into(double u, int frequencies, std::span<double> out) {
  const double base = std::numbers::pi / 2.0 * u;
  for (int k = 0; k < frequencies; ++k) {
    const double w = std::ldexp(base, k);
    out[2 * k] = std::sin(w);
    out[2 * k + 1] = std::cos(w);
  }
}

std::vector<double> positional_encode(double u, int frequencies) {
  if (frequencies < 1) throw std::invalid_argument("frequency count must be >= 1");
  std::vector<double> out(2 * frequencies);
  positional_encode_into(u, frequencies, out);
  return out;
}

void encode_position_into(double x, double y, double d, const PositionNorms& norms, std::span<double> out) {
  positional_encode_into(norms.x.normalize(x), kPositionFreqXY, out.subspan(0, 2 * kPositionFreqXY));
  positional_encode_into(norms.y.normalize(y), kPositionFreqXY, out.subspan(2 * kPositionFreqXY, 2 * kPositionFreqXY));
  positional_encode_into(norms.d.normalize(d), kPositionFreqD, out.subspan(4 * kPositionFreqXY, 2 * kPositionFreqD));
}

std::vector<double> encode_position(double x, double y, double d, const PositionNorms& norms) {
  std::vector<double> out(kPositionEncodingDim);
  encode_position_into(x, y, d, norms, out);
  return out;
}

void encode_view_into(double vx, double vy, std::span<double> out) {
  positional_encode_into(vx, kViewFreq, out.subspan(0, 2 * kViewFreq));
  positional_encode_into(vy, kViewFreq, out.subspan(2 * kViewFreq, 2 * kViewFreq));
}

std::vector<double> encode_view(double vx, double vy) {
  std::vector<double> out(kViewEncodingDim);
  encode_view_into(vx, vy, out);
  return out;
}

// ---------------------------------------------------------------------------

void MlpGradient::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& o) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += o.weight[i];
    bias[i] += o.bias[i];
  }
  return *this;
}

Mlp::Mlp(const std::vector<int>& dims, Activation hidden, Activation head, std::mt19937_64& rng) {
  if (dims.size() < 2) throw std::invalid_argument("MLP needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i], out = dims[i + 1];
    if (in < 1 || out < 1) throw std::invalid_argument("MLP layer dims must be positive");
    DenseLayer layer;
    layer.weight.resize(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = i + 2 == dims.size() ? head : hidden;
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Row-major fill so the draw order does not depend on Eigen's storage.
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    layers_.push_back(std::move(layer));
  }
  head_.assign(dims.back(), head);
}

void Mlp::set_head_activation(int channel, Activation a) { head_.at(channel) = a; }
Activation Mlp::head_activation(int channel) const { return head_.at(channel); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

using StridedRef = Eigen::Ref<Eigen::MatrixXd, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstStridedRef = Eigen::Ref<const Eigen::MatrixXd, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

void apply(Activation a, StridedRef z) {
  switch (a) {
    case Activation::linear: break;
    case Activation::leaky_relu: z = z.unaryExpr([](double v) { return v >= 0.0 ? v : kLeakySlope * v; }); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
    case Activation::tanh: z = z.array().tanh(); break;
  }
}

// Multiplies `g` in place by the activation derivative, given the
// pre-activation `pre` and the activated output `out`.
void apply_derivative(Activation a, StridedRef g, const ConstStridedRef& pre, const ConstStridedRef& out) {
  switch (a) {
    case Activation::linear: break;
    case Activation::leaky_relu:
      g = g.binaryExpr(pre, [](double gv, double p) { return p >= 0.0 ? gv : kLeakySlope * gv; });
      break;
    case Activation::sigmoid: g.array() *= out.array() * (1.0 - out.array()); break;
    case Activation::tanh: g.array() *= 1.0 - out.array().square(); break;
  }
}

}  // namespace

void Mlp::activate_head(Eigen::MatrixXd& z) const {
  const auto first = head_.empty() ? layers_.back().activation : head_.front();
  bool uniform = true;
  for (auto a : head_) uniform = uniform && a == first;
  if (uniform) {
    apply(first, z);
    return;
  }
  for (Eigen::Index r = 0; r < z.rows(); ++r) apply(head_[r], z.row(r));
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, MlpCache* cache) const {
  if (layers_.empty()) throw std::logic_error("forward on empty MLP");
  if (input.rows() != input_dim())
    throw std::invalid_argument("MLP input has " + std::to_string(input.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  if (cache) {
    cache->inputs.resize(layers_.size());
    cache->pre.resize(layers_.size());
  }
  Eigen::MatrixXd x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Eigen::MatrixXd z = l.weight * x;
    z.colwise() += l.bias;
    if (cache) {
      cache->inputs[i] = std::move(x);
      cache->pre[i] = z;
    }
    if (i + 1 == layers_.size()) activate_head(z);
    else apply(l.activation, z);
    x = std::move(z);
  }
  if (cache) cache->output = x;
  return x;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

MlpGradient Mlp::zero_gradient() const {
  MlpGradient g;
  for (const auto& l : layers_) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

Eigen::MatrixXd Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& grad_output, MlpGradient& grads,
                              bool want_input) const {
  const std::size_t n = layers_.size();
  if (cache.pre.size() != n || cache.inputs.size() != n || cache.output.rows() != grad_output.rows() ||
      cache.output.cols() != grad_output.cols())
    throw std::invalid_argument("MLP cache does not match the gradient shape");
  if (grads.weight.size() != n) grads = zero_gradient();

  Eigen::MatrixXd g = grad_output;
  for (std::size_t k = n; k-- > 0;) {
    const auto& l = layers_[k];
    const Eigen::MatrixXd& out = k + 1 == n ? cache.output : cache.inputs[k + 1];
    if (k + 1 == n) {
      for (Eigen::Index r = 0; r < g.rows(); ++r)
        apply_derivative(head_[r], g.row(r), cache.pre[k].row(r), out.row(r));
    } else {
      apply_derivative(l.activation, g, cache.pre[k], out);
    }
    grads.weight[k].noalias() += g * cache.inputs[k].transpose();
    grads.bias[k] += g.rowwise().sum();
    if (k == 0 && !want_input) return {};
    g = l.weight.transpose() * g;
  }
  return g;
}

// ---------------------------------------------------------------------------

void AdamState::reset(std::span<const ParamView> params) {
  step = 0;
  m.assign(params.size(), {});
  v.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i].assign(params[i].values.size(), 0.0);
    v[i].assign(params[i].values.size(), 0.0);
  }
}

void adam_step(AdamState& state, std::span<const ParamView> params, std::span<const std::span<const double>> grads,
               std::span<const double> group_lr, std::span<const std::string> group_names) {
  if (grads.size() != params.size()) throw std::invalid_argument("Adam: gradient count does not match parameters");
  if (state.m.size() != params.size()) state.reset(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].values.size() || state.m[i].size() != params[i].values.size())
      throw std::invalid_argument("Adam: shape mismatch for '" + params[i].name + "'");
    for (double g : grads[i]) {
      if (std::isnan(g)) {
        const int grp = params[i].group;
        const std::string gname = grp < static_cast<int>(group_names.size()) ? group_names[grp]
                                                                              : "group " + std::to_string(grp);
        throw std::runtime_error("NaN gradient in parameter group '" + gname + "' (" + params[i].name + ")");
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double lr = group_lr[params[i].group];
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto p = params[i].values;
    const auto g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double lr_schedule(double base_lr, long epoch, long decay_epochs) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  return base_lr * std::pow(0.1, static_cast<double>(epoch / decay_epochs));
}

}  // namespace nex
