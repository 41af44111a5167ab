#include "nex/mpi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nex {

std::string ModelModes::label() const {
  auto tag = [](Mode m) { return m == Mode::explicit_grid ? "Ex" : "Im"; };
  return std::string(tag(alpha)) + "-" + tag(k0) + "-" + tag(coeffs);
}

ModelModes ModelModes::parse(const std::string& label) {
  std::vector<Mode> parts;
  std::stringstream ss(label);
  std::string tok;
  while (std::getline(ss, tok, '-')) {
    if (tok == "Ex" || tok == "ex") parts.push_back(Mode::explicit_grid);
    else if (tok == "Im" || tok == "im") parts.push_back(Mode::implicit_net);
    else throw std::invalid_argument("bad mode label '" + label + "'");
  }
  if (parts.size() != 3) throw std::invalid_argument("mode label needs three parts: '" + label + "'");
  return {parts[0], parts[1], parts[2]};
}

bool in_grid(int width, int height, double u, double v) {
  return u >= 0.0 && u <= width && v >= 0.0 && v <= height;
}

BilinearTap bilinear_tap(int width, int height, double u, double v) {
  const double tx = std::clamp(u - 0.5, 0.0, static_cast<double>(width - 1));
  const double ty = std::clamp(v - 0.5, 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(tx), std::max(width - 2, 0));
  const int y0 = std::min(static_cast<int>(ty), std::max(height - 2, 0));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = tx - x0, fy = ty - y0;
  BilinearTap t;
  t.texel = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
  t.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return t;
}

void sample_grid(const Image& grid, const BilinearTap& tap, std::span<double> out) {
  const int c = grid.channels;
  for (int k = 0; k < c; ++k) out[k] = 0.0;
  for (int t = 0; t < 4; ++t) {
    const double w = tap.weight[t];
    const double* px = grid.data.data() + static_cast<std::size_t>(tap.texel[t]) * c;
    for (int k = 0; k < c; ++k) out[k] += w * px[k];
  }
}

bool MpiModel::uses_color_net() const {
  return modes.alpha == Mode::implicit_net || needs_shared_query();
}

int MpiModel::alpha_channel() const { return modes.alpha == Mode::implicit_net ? 0 : -1; }

int MpiModel::k0_offset() const {
  if (modes.k0 != Mode::implicit_net) return -1;
  return modes.alpha == Mode::implicit_net ? 1 : 0;
}

int MpiModel::coeff_offset() const {
  if (modes.coeffs != Mode::implicit_net || coeff_count() == 0) return -1;
  return (modes.alpha == Mode::implicit_net ? 1 : 0) + (modes.k0 == Mode::implicit_net ? 3 : 0);
}

int MpiModel::color_outputs() const {
  return (modes.alpha == Mode::implicit_net ? 1 : 0) + (modes.k0 == Mode::implicit_net ? 3 : 0) +
         (modes.coeffs == Mode::implicit_net ? 3 * coeff_count() : 0);
}

void MpiModel::validate() const {
  if (plane_count() < 1) throw std::invalid_argument("model has no planes");
  if (sharing < 1 || plane_count() % sharing != 0)
    throw std::invalid_argument("plane count must be divisible by the sharing factor");
  basis.validate();
  if (uses_color_net() != !color_net.empty()) throw std::invalid_argument("color network presence mismatch");
  if (uses_color_net() && color_net.output_dim() != color_outputs())
    throw std::invalid_argument("color network head does not match the coefficient count");
  if (uses_basis_net() && basis_net.output_dim() != coeff_count())
    throw std::invalid_argument("basis network output does not match the coefficient count");
  if (modes.k0 == Mode::explicit_grid && static_cast<int>(k0.size()) != group_count())
    throw std::invalid_argument("K0 grid count mismatch");
  if (modes.alpha == Mode::explicit_grid && static_cast<int>(alpha_grid.size()) != plane_count())
    throw std::invalid_argument("alpha grid count mismatch");
  if (modes.coeffs == Mode::explicit_grid && coeff_count() > 0 && static_cast<int>(coeff_grid.size()) != group_count())
    throw std::invalid_argument("coefficient grid count mismatch");
}

std::vector<ParamView> MpiModel::parameters() {
  std::vector<ParamView> out;
  auto add_net = [&out](Mlp& net, const std::string& prefix) {
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      auto& l = net.layers()[i];
      out.push_back({prefix + ".w" + std::to_string(i), kGroupNets,
                     {l.weight.data(), static_cast<std::size_t>(l.weight.size())},
                     {static_cast<int>(l.weight.rows()), static_cast<int>(l.weight.cols())}});
      out.push_back({prefix + ".b" + std::to_string(i), kGroupNets,
                     {l.bias.data(), static_cast<std::size_t>(l.bias.size())},
                     {static_cast<int>(l.bias.size())}});
    }
  };
  auto add_grids = [&out](std::vector<Image>& grids, const std::string& prefix) {
    for (std::size_t i = 0; i < grids.size(); ++i) {
      auto& g = grids[i];
      out.push_back({prefix + std::to_string(i), kGroupBase, {g.data.data(), g.data.size()},
                     {g.height, g.width, g.channels}});
    }
  };
  add_net(color_net, "color_net");
  add_net(basis_net, "basis_net");
  add_grids(k0, "k0_");
  add_grids(alpha_grid, "alpha_");
  add_grids(coeff_grid, "coeff_");
  return out;
}

MpiModel make_model(const Camera& reference, double near, double far, const ModelOptions& opts) {
  MpiModel m;
  if (opts.margin < 0) throw std::invalid_argument("margin must be >= 0");
  m.reference = reference;
  m.reference.width += 2 * opts.margin;
  m.reference.height += 2 * opts.margin;
  m.reference.cx += opts.margin;
  m.reference.cy += opts.margin;
  m.planes = plane_depths(near, far, opts.planes, opts.spacing);
  m.sharing = opts.sharing;
  m.basis = opts.basis;
  m.modes = opts.modes;
  m.shape = opts.shape;
  m.alpha_bias_init = opts.alpha_bias_init;
  m.norms.x = {0.0, static_cast<double>(m.reference.width - 1)};
  m.norms.y = {0.0, static_cast<double>(m.reference.height - 1)};
  m.norms.d = {0.0, static_cast<double>(opts.planes - 1)};
  if (m.sharing < 1 || opts.planes % m.sharing != 0)
    throw std::invalid_argument("plane count must be divisible by the sharing factor");

  std::mt19937_64 rng(opts.seed);
  if (m.uses_color_net()) {
    std::vector<int> dims{kPositionEncodingDim};
    for (int i = 0; i < opts.shape.color_layers; ++i) dims.push_back(opts.shape.color_width);
    dims.push_back(m.color_outputs());
    m.color_net = Mlp(dims, Activation::leaky_relu, Activation::tanh, rng);
    if (m.alpha_channel() >= 0) {
      m.color_net.set_head_activation(m.alpha_channel(), Activation::sigmoid);
      m.color_net.layers().back().bias(m.alpha_channel()) = opts.alpha_bias_init;
    }
    if (m.k0_offset() >= 0)
      for (int c = 0; c < 3; ++c) m.color_net.set_head_activation(m.k0_offset() + c, Activation::sigmoid);
  }
  if (m.uses_basis_net()) {
    std::vector<int> dims{kViewEncodingDim};
    for (int i = 0; i < opts.shape.basis_layers; ++i) dims.push_back(opts.shape.basis_width);
    dims.push_back(m.coeff_count());
    m.basis_net = Mlp(dims, Activation::leaky_relu, Activation::linear, rng);
  }
  const int w = m.reference.width, h = m.reference.height;
  if (m.modes.k0 == Mode::explicit_grid) m.k0.assign(m.group_count(), Image(w, h, 3, 0.5));
  if (m.modes.alpha == Mode::explicit_grid) m.alpha_grid.assign(opts.planes, Image(w, h, 1, opts.alpha_bias_init));
  if (m.modes.coeffs == Mode::explicit_grid && m.coeff_count() > 0)
    m.coeff_grid.assign(m.group_count(), Image(w, h, 3 * m.coeff_count(), 0.0));
  m.validate();
  return m;
}

double representative_index(const MpiModel& model, int plane, std::span<const double> plane_indices) {
  const int rep = model.representative(model.group_of(plane));
  return plane_indices.empty() ? static_cast<double>(rep) : plane_indices[rep];
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

PlaneValues query_alpha_coeffs(const MpiModel& model, const PixelQuery& q) {
  if (q.plane < 0 || q.plane >= model.plane_count()) throw std::out_of_range("plane index out of range");
  const int n = model.coeff_count();
  const int g = model.group_of(q.plane);
  const int rep = model.representative(g);
  PlaneValues out;
  out.coeffs.assign(3 * n, 0.0);
  const BilinearTap tap = bilinear_tap(model.width(), model.height(), q.x, q.y);
  const double tx = q.x - 0.5, ty = q.y - 0.5;

  Eigen::VectorXd own, shared;
  if (model.alpha_channel() >= 0) {
    Eigen::VectorXd in(kPositionEncodingDim);
    encode_position_into(tx, ty, q.plane_index, model.norms, {in.data(), kPositionEncodingDim});
    own = model.color_net.forward(in);
    out.alpha = own(model.alpha_channel());
  } else {
    double logit;
    sample_grid(model.alpha_grid[q.plane], tap, {&logit, 1});
    out.alpha = sigmoid(logit);
  }
  if (model.needs_shared_query()) {
    if (model.alpha_channel() >= 0 && q.plane == rep && q.plane_index == rep) {
      shared = own;
    } else {
      Eigen::VectorXd in(kPositionEncodingDim);
      encode_position_into(tx, ty, rep, model.norms, {in.data(), kPositionEncodingDim});
      shared = model.color_net.forward(in);
    }
  }
  if (model.k0_offset() >= 0) {
    out.k0 = shared.segment<3>(model.k0_offset());
  } else {
    sample_grid(model.k0[g], tap, {out.k0.data(), 3});
  }
  if (n > 0) {
    if (model.coeff_offset() >= 0) {
      for (int i = 0; i < 3 * n; ++i) out.coeffs[i] = shared(model.coeff_offset() + i);
    } else {
      sample_grid(model.coeff_grid[g], tap, out.coeffs);
    }
  }
  return out;
}

Rgb pixel_color(const Rgb& k0, std::span<const double> coeffs, std::span<const double> basis) {
  if (coeffs.size() != 3 * basis.size()) throw std::invalid_argument("coefficient/basis length mismatch");
  Rgb c = k0;
  for (std::size_t n = 0; n < basis.size(); ++n)
    for (int ch = 0; ch < 3; ++ch) c[ch] += coeffs[3 * n + ch] * basis[n];
  return c;
}

Rgb composite(std::span<const double> alphas, std::span<const Rgb> colors) {
  if (alphas.empty() || alphas.size() != colors.size())
    throw std::invalid_argument("composite needs equal, non-empty alpha and color lists");
  Rgb out = Rgb::Zero();
  double trans = 1.0;
  for (std::size_t d = alphas.size(); d-- > 0;) {
    out += (trans * alphas[d]) * colors[d];
    trans *= 1.0 - alphas[d];
  }
  return out;
}

double transmittance(std::span<const double> alphas, int d) {
  if (d < 0 || d >= static_cast<int>(alphas.size())) throw std::out_of_range("transmittance index out of range");
  double t = alphas[d];
  for (std::size_t i = d + 1; i < alphas.size(); ++i) t *= 1.0 - alphas[i];
  return t;
}

std::vector<double> basis_values(const MpiModel& model, const Eigen::Vector3d& view) {
  const int n = model.coeff_count();
  std::vector<double> h(n, 0.0);
  if (n == 0) return h;
  if (model.basis.family == BasisFamily::learned) {
    Eigen::VectorXd in(kViewEncodingDim);
    encode_view_into(view.x(), view.y(), {in.data(), kViewEncodingDim});
    const Eigen::VectorXd out = model.basis_net.forward(in);
    for (int i = 0; i < n; ++i) h[i] = out(i);
  } else {
    eval_fixed_basis_masked(model.basis, view, h);
  }
  return h;
}

}  // namespace nex
