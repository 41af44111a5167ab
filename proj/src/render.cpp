#include "nex/render.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <stdexcept>

#include "nex/geometry.hpp"

namespace nex {

int resolve_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

ModelGradient ModelGradient::zeros_like(const MpiModel& model) {
  ModelGradient g;
  g.color = model.color_net.zero_gradient();
  g.basis = model.basis_net.zero_gradient();
  auto zero = [](const std::vector<Image>& src) {
    std::vector<Image> out;
    for (const auto& im : src) out.emplace_back(im.width, im.height, im.channels, 0.0);
    return out;
  };
  g.k0 = zero(model.k0);
  g.alpha_grid = zero(model.alpha_grid);
  g.coeff_grid = zero(model.coeff_grid);
  return g;
}

std::vector<std::span<double>> ModelGradient::flat() {
  std::vector<std::span<double>> out;
  for (auto* net : {&color, &basis}) {
    for (std::size_t i = 0; i < net->weight.size(); ++i) {
      out.emplace_back(net->weight[i].data(), static_cast<std::size_t>(net->weight[i].size()));
      out.emplace_back(net->bias[i].data(), static_cast<std::size_t>(net->bias[i].size()));
    }
  }
  for (auto* grids : {&k0, &alpha_grid, &coeff_grid})
    for (auto& im : *grids) out.emplace_back(im.data.data(), im.data.size());
  return out;
}

void accumulate(ModelGradient& total, const ChunkGradient& chunk) {
  if (!chunk.color.weight.empty()) total.color += chunk.color;
  if (!chunk.basis.weight.empty()) total.basis += chunk.basis;
  for (const auto& t : chunk.taps) {
    std::vector<Image>* grids = t.family == GridFamily::k0      ? &total.k0
                                : t.family == GridFamily::alpha ? &total.alpha_grid
                                                                : &total.coeff_grid;
    (*grids)[t.grid].data[t.element] += t.value;
  }
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

RayBatch::RayBatch(const MpiModel& model, const Camera& cam, std::span<const Eigen::Vector2d> pixels,
                   std::span<const double> plane_indices)
    : model_(&model), planes_(model.plane_count()), n_(model.coeff_count()) {
  if (!plane_indices.empty() && static_cast<int>(plane_indices.size()) != planes_)
    throw std::invalid_argument("plane index list must have one entry per plane");
  const std::size_t rays = pixels.size();
  const int w = model.width(), h = model.height();
  const Camera& ref = model.reference;
  const Eigen::Matrix3d to_ref = ref.rotation.transpose();
  samples_.assign(rays * planes_, Sample{});
  coeffs_.assign(rays * planes_ * 3 * n_, 0.0);
  basis_.assign(rays * planes_ * n_, 0.0);
  colors_.assign(rays, Rgb::Zero());

  std::vector<double> index(planes_), depth(planes_);
  for (int d = 0; d < planes_; ++d) {
    index[d] = plane_indices.empty() ? d : plane_indices[d];
    depth[d] = plane_indices.empty() ? model.planes.finite_depth(d)
                                     : PlaneStack::finite(model.planes.depth_at(index[d]));
  }

  // Geometry and query assembly.
  const bool alpha_net = model.alpha_channel() >= 0;
  const bool shared_net = model.needs_shared_query();
  const bool basis_net = model.uses_basis_net();
  std::vector<Eigen::Vector3d> views(rays * planes_);
  std::vector<std::array<double, 3>> color_queries;  // (x, y, plane index)
  int basis_cols = 0;
  for (std::size_t r = 0; r < rays; ++r) {
    for (int d = 0; d < planes_; ++d) {
      Sample& s = samples_[r * planes_ + d];
      const PlaneHit hit = ray_plane_point(cam, pixels[r], ref, depth[d]);
      const double u = hit.ref_pixel.x(), v = hit.ref_pixel.y();
      if (!in_grid(w, h, u, v)) continue;
      s.inside = true;
      s.tap = bilinear_tap(w, h, u, v);
      views[r * planes_ + d] = to_ref * viewing_direction(hit.world, cam.center);
      const int rep = model.representative(model.group_of(d));
      if (alpha_net) {
        s.alpha_col = static_cast<int>(color_queries.size());
        color_queries.push_back({u - 0.5, v - 0.5, index[d]});
      }
      if (shared_net) {
        if (alpha_net && d == rep) {
          s.shared_col = s.alpha_col;
        } else {
          s.shared_col = static_cast<int>(color_queries.size());
          color_queries.push_back({u - 0.5, v - 0.5, index[rep]});
        }
      }
      if (basis_net) s.basis_col = basis_cols++;
    }
  }

  Eigen::MatrixXd color_out, basis_out;
  if (!color_queries.empty()) {
    Eigen::MatrixXd in(kPositionEncodingDim, color_queries.size());
    for (std::size_t q = 0; q < color_queries.size(); ++q)
      encode_position_into(color_queries[q][0], color_queries[q][1], color_queries[q][2], model.norms,
                           {in.col(q).data(), kPositionEncodingDim});
    color_out = model.color_net.forward(in, &color_cache_);
  }
  if (basis_cols > 0) {
    Eigen::MatrixXd in(kViewEncodingDim, basis_cols);
    for (std::size_t i = 0; i < samples_.size(); ++i)
      if (samples_[i].basis_col >= 0)
        encode_view_into(views[i].x(), views[i].y(), {in.col(samples_[i].basis_col).data(), kViewEncodingDim});
    basis_out = model.basis_net.forward(in, &basis_cache_);
  }

  // Per-plane values and compositing.
  const int a_ch = model.alpha_channel(), k_off = model.k0_offset(), c_off = model.coeff_offset();
  std::vector<double> alphas(planes_);
  std::vector<Rgb> cols(planes_);
  for (std::size_t r = 0; r < rays; ++r) {
    for (int d = 0; d < planes_; ++d) {
      const std::size_t i = r * planes_ + d;
      Sample& s = samples_[i];
      alphas[d] = 0.0;
      cols[d].setZero();
      if (!s.inside) continue;
      const int g = model.group_of(d);
      if (a_ch >= 0) {
        s.alpha = color_out(a_ch, s.alpha_col);
      } else {
        double logit;
        sample_grid(model.alpha_grid[d], s.tap, {&logit, 1});
        s.alpha = sigmoid(logit);
      }
      if (k_off >= 0) s.k0 = color_out.block<3, 1>(k_off, s.shared_col);
      else sample_grid(model.k0[g], s.tap, {s.k0.data(), 3});
      std::span<double> coeff(coeffs_.data() + i * 3 * n_, 3 * n_);
      std::span<double> hb(basis_.data() + i * n_, n_);
      if (n_ > 0) {
        if (c_off >= 0) {
          for (int k = 0; k < 3 * n_; ++k) coeff[k] = color_out(c_off + k, s.shared_col);
        } else {
          sample_grid(model.coeff_grid[g], s.tap, coeff);
        }
        if (basis_net) {
          for (int k = 0; k < n_; ++k) hb[k] = basis_out(k, s.basis_col);
        } else {
          eval_fixed_basis_masked(model.basis, views[i], hb);
        }
      }
      s.color = pixel_color(s.k0, coeff, hb);
      alphas[d] = s.alpha;
      cols[d] = s.color;
    }
    colors_[r] = composite(alphas, cols);
  }
}

void RayBatch::backward(std::span<const Rgb> grad_colors, ChunkGradient& out) const {
  if (grad_colors.size() != colors_.size()) throw std::invalid_argument("gradient count does not match rays");
  const MpiModel& model = *model_;
  const int a_ch = model.alpha_channel(), k_off = model.k0_offset(), c_off = model.coeff_offset();
  const bool basis_net = model.uses_basis_net();
  Eigen::MatrixXd g_color, g_basis;
  if (color_cache_.output.size() > 0) g_color = Eigen::MatrixXd::Zero(color_cache_.output.rows(), color_cache_.output.cols());
  if (basis_cache_.output.size() > 0) g_basis = Eigen::MatrixXd::Zero(basis_cache_.output.rows(), basis_cache_.output.cols());

  auto scatter = [&out](GridFamily fam, int grid, const BilinearTap& tap, int channels, int channel, double value) {
    if (value == 0.0) return;
    for (int t = 0; t < 4; ++t) {
      if (tap.weight[t] == 0.0) continue;
      out.taps.push_back({fam, static_cast<std::uint32_t>(grid),
                          static_cast<std::uint32_t>(tap.texel[t] * channels + channel), tap.weight[t] * value});
    }
  };

  std::vector<Rgb> behind(planes_);
  for (std::size_t r = 0; r < colors_.size(); ++r) {
    const Rgb& g = grad_colors[r];
    // behind[d]: composite of planes 0..d-1 as seen just behind plane d.
    Rgb acc = Rgb::Zero();
    for (int d = 0; d < planes_; ++d) {
      behind[d] = acc;
      const Sample& s = samples_[r * planes_ + d];
      if (s.inside) acc = s.alpha * s.color + (1.0 - s.alpha) * acc;
    }
    double trans = 1.0;  // product of (1 - alpha) over planes in front
    for (int d = planes_ - 1; d >= 0; --d) {
      const std::size_t i = r * planes_ + d;
      const Sample& s = samples_[i];
      if (!s.inside) continue;
      const Rgb dc = (trans * s.alpha) * g;
      const double dalpha = trans * g.dot(s.color - behind[d]);
      trans *= 1.0 - s.alpha;
      const int grp = model.group_of(d);

      if (a_ch >= 0) g_color(a_ch, s.alpha_col) += dalpha;
      else scatter(GridFamily::alpha, d, s.tap, 1, 0, dalpha * s.alpha * (1.0 - s.alpha));

      if (k_off >= 0) {
        for (int c = 0; c < 3; ++c) g_color(k_off + c, s.shared_col) += dc[c];
      } else {
        for (int c = 0; c < 3; ++c) scatter(GridFamily::k0, grp, s.tap, 3, c, dc[c]);
      }
      if (n_ == 0) continue;
      const double* coeff = coeffs_.data() + i * 3 * n_;
      const double* hb = basis_.data() + i * n_;
      for (int k = 0; k < n_; ++k) {
        for (int c = 0; c < 3; ++c) {
          const double dk = dc[c] * hb[k];
          if (c_off >= 0) g_color(c_off + 3 * k + c, s.shared_col) += dk;
          else scatter(GridFamily::coeff, grp, s.tap, 3 * n_, 3 * k + c, dk);
        }
        if (basis_net) g_basis(k, s.basis_col) += dc.dot(Rgb(coeff[3 * k], coeff[3 * k + 1], coeff[3 * k + 2]));
      }
    }
  }
  if (g_color.size() > 0) model.color_net.backward(color_cache_, g_color, out.color, false);
  if (g_basis.size() > 0) model.basis_net.backward(basis_cache_, g_basis, out.basis, false);
}

RayEvaluator::RayEvaluator(const MpiModel& model, const Camera& cam, std::span<const Eigen::Vector2d> pixels,
                           std::span<const double> plane_indices, int workers) {
  const std::size_t n = pixels.size();
  const std::size_t chunks = (n + kChunkRays - 1) / kChunkRays;
  std::vector<std::optional<RayBatch>> built(chunks);
  offsets_.resize(chunks + 1);
  for (std::size_t c = 0; c <= chunks; ++c) offsets_[c] = std::min(n, c * kChunkRays);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    try {
      built[c].emplace(model, cam, pixels.subspan(offsets_[c], offsets_[c + 1] - offsets_[c]), plane_indices);
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  chunks_.reserve(chunks);
  colors_.reserve(n);
  for (auto& b : built) {
    colors_.insert(colors_.end(), b->colors().begin(), b->colors().end());
    chunks_.push_back(std::move(*b));
  }
}

void RayEvaluator::backward(std::span<const Rgb> grad_colors, ModelGradient& total, int workers) const {
  if (grad_colors.size() != colors_.size()) throw std::invalid_argument("gradient count does not match rays");
  std::vector<ChunkGradient> parts(chunks_.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks_.size()); ++c) {
    chunks_[c].backward(grad_colors.subspan(offsets_[c], offsets_[c + 1] - offsets_[c]), parts[c]);
  }
  // Fixed reduction order: chunk 0, 1, 2, ...
  for (const auto& p : parts) accumulate(total, p);
}

Rgb render_ray(const MpiModel& model, const Camera& cam, const Eigen::Vector2d& pixel) {
  if (!(pixel.x() >= 0.0 && pixel.x() <= cam.width && pixel.y() >= 0.0 && pixel.y() <= cam.height))
    throw std::out_of_range("pixel outside the camera image");
  const Eigen::Vector2d p[1] = {pixel};
  RayBatch batch(model, cam, p);
  return batch.colors()[0];
}

namespace {

// One batched pass per row; both renderers share it so their output matches bitwise.
void render_row(const MpiModel& model, const Camera& cam, int y, Image& out) {
  std::vector<Eigen::Vector2d> centers(cam.width);
  for (int x = 0; x < cam.width; ++x) centers[x] = {x + 0.5, y + 0.5};
  const RayBatch batch(model, cam, centers);
  for (int x = 0; x < cam.width; ++x) {
    const Rgb& c = batch.colors()[x];
    for (int ch = 0; ch < 3; ++ch) {
      if (!std::isfinite(c[ch])) throw std::runtime_error("non-finite pixel value in render");
      out.at(x, y, ch) = std::clamp(c[ch], 0.0, 1.0);
    }
  }
}

}  // namespace

Image render_image(const MpiModel& model, const Camera& cam, int workers) {
  Image out(cam.width, cam.height, 3);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (int y = 0; y < cam.height; ++y) {
    try {
      render_row(model, cam, y, out);
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

Image render_image_serial(const MpiModel& model, const Camera& cam) {
  Image out(cam.width, cam.height, 3);
  for (int y = 0; y < cam.height; ++y) render_row(model, cam, y, out);
  return out;
}

MpiModel upsample_planes(const MpiModel& model, int factor) {
  if (factor != 1 && factor != 2 && factor != 4) throw std::invalid_argument("upsampling factor must be 1, 2 or 4");
  if (factor == 1) return model;
  if (model.modes.alpha != Mode::implicit_net)
    throw std::invalid_argument("plane upsampling needs alpha predicted by the network");
  MpiModel out = model;
  const int d = factor * model.plane_count();
  out.planes = plane_depths(model.planes.near, model.planes.far, d, model.planes.spacing);
  out.sharing = factor * model.sharing;
  if (d % out.sharing != 0) throw std::invalid_argument("upsampled group size is not an integer");
  out.norms.d = {0.0, static_cast<double>(d - 1)};
  out.validate();
  return out;
}

}  // namespace nex
