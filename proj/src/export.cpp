#include "nex/export.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "nex/geometry.hpp"
#include "nex/render.hpp"

namespace nex {

using nlohmann::json;

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Affine-maps raw values to [0,1] using their min/max and quantizes.
QuantizedImage quantize_image(const Image& raw, int bits) {
  QuantizedImage q;
  q.image = Image(raw.width, raw.height, raw.channels);
  if (raw.data.empty()) return q;
  const auto [lo, hi] = std::minmax_element(raw.data.begin(), raw.data.end());
  q.offset = *lo;
  q.scale = *hi - *lo;
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    const double u = q.scale > 0.0 ? (raw.data[i] - q.offset) / q.scale : 0.0;
    q.image.data[i] = dequantize_unit(quantize_unit(u, bits), bits);
  }
  return q;
}

void quantize_in_place(Image& img, int bits) {
  for (double& v : img.data) v = dequantize_unit(quantize_unit(v, bits), bits);
}

Eigen::MatrixXd encode_texels(const MpiModel& model, double plane_index) {
  const int w = model.width(), h = model.height();
  Eigen::MatrixXd in(kPositionEncodingDim, static_cast<Eigen::Index>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      encode_position_into(x, y, plane_index, model.norms,
                           {in.col(static_cast<Eigen::Index>(y) * w + x).data(), kPositionEncodingDim});
  return in;
}

}  // namespace

double BakedMpi::alpha_at(int plane, int texel) const {
  const Image& img = alpha[plane / 3];
  return img.data[static_cast<std::size_t>(texel) * 3 + plane % 3];
}

double BakedMpi::basis_node(int n, int i, int j) const {
  const int tile = n / 3;
  return basis_offset[n] + basis_scale[n] * basis.at(tile * grid + i, j, n % 3);
}

BakedMpi bake(const MpiModel& model, const BakeOptions& opts) {
  if (opts.bits != 8 && opts.bits != 16) throw std::invalid_argument("bake bit depth must be 8 or 16");
  if (opts.grid < 2) throw std::invalid_argument("basis grid must have at least 2 nodes");
  if (!(opts.span > 0.0 && opts.span < 1.0)) throw std::invalid_argument("span must be in (0, 1)");
  model.validate();
  const int w = model.width(), h = model.height(), d_count = model.plane_count(), n = model.coeff_count();
  const std::size_t texels = static_cast<std::size_t>(w) * h;

  BakedMpi b;
  b.bits = opts.bits;
  b.reference = model.reference;
  for (int d = 0; d < d_count; ++d) b.depths.push_back(model.planes.finite_depth(d));
  b.sharing = model.sharing;
  b.coeffs = n;
  b.family = model.basis.family;
  b.span = opts.span;
  b.grid = opts.grid;

  // Alpha per plane.
  std::vector<std::vector<double>> alpha(d_count, std::vector<double>(texels));
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(opts.workers))
  for (int d = 0; d < d_count; ++d) {
    if (model.alpha_channel() >= 0) {
      const Eigen::MatrixXd out = model.color_net.forward(encode_texels(model, d));
      for (std::size_t t = 0; t < texels; ++t) alpha[d][t] = out(model.alpha_channel(), static_cast<Eigen::Index>(t));
    } else {
      for (std::size_t t = 0; t < texels; ++t) alpha[d][t] = sigmoid(model.alpha_grid[d].data[t]);
    }
  }
  const int packs = (d_count + 2) / 3;
  for (int k = 0; k < packs; ++k) {
    Image img(w, h, 3, 0.0);
    for (int c = 0; c < 3 && 3 * k + c < d_count; ++c)
      for (std::size_t t = 0; t < texels; ++t) img.data[t * 3 + c] = alpha[3 * k + c][t];
    quantize_in_place(img, opts.bits);
    b.alpha.push_back(std::move(img));
  }

  // Base color and coefficients per group.
  const int groups = model.group_count();
  b.k0.resize(groups);
  b.coef.assign(groups, std::vector<QuantizedImage>(n));
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(opts.workers))
  for (int g = 0; g < groups; ++g) {
    Eigen::MatrixXd shared;
    if (model.needs_shared_query()) shared = model.color_net.forward(encode_texels(model, model.representative(g)));
    Image k0(w, h, 3);
    for (std::size_t t = 0; t < texels; ++t)
      for (int c = 0; c < 3; ++c)
        k0.data[t * 3 + c] = model.k0_offset() >= 0 ? shared(model.k0_offset() + c, static_cast<Eigen::Index>(t))
                                                    : model.k0[g].data[t * 3 + c];
    b.k0[g] = quantize_image(k0, opts.bits);
    for (int k = 0; k < n; ++k) {
      Image coef(w, h, 3);
      for (std::size_t t = 0; t < texels; ++t)
        for (int c = 0; c < 3; ++c)
          coef.data[t * 3 + c] = model.coeff_offset() >= 0
                                     ? shared(model.coeff_offset() + 3 * k + c, static_cast<Eigen::Index>(t))
                                     : model.coeff_grid[g].data[t * 3 * n + 3 * k + c];
      b.coef[g][k] = quantize_image(coef, opts.bits);
    }
  }

  // Basis lookup over the viewing span.
  const int r = opts.grid;
  const int tiles = (n + 2) / 3;
  b.basis = Image(std::max(tiles, 1) * r, r, 3, 0.0);
  b.basis_scale.assign(n, 0.0);
  b.basis_offset.assign(n, 0.0);
  if (n > 0) {
    std::vector<Image> raw(n, Image(r, r, 1));
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i) {
        const double vx = -opts.span + 2.0 * opts.span * i / (r - 1);
        const double vy = -opts.span + 2.0 * opts.span * j / (r - 1);
        const Eigen::Vector3d v(vx, vy, std::sqrt(std::max(0.0, 1.0 - vx * vx - vy * vy)));
        const auto hv = basis_values(model, v);
        for (int k = 0; k < n; ++k) raw[k].at(i, j) = hv[k];
      }
    for (int k = 0; k < n; ++k) {
      const QuantizedImage q = quantize_image(raw[k], opts.bits);
      b.basis_scale[k] = q.scale;
      b.basis_offset[k] = q.offset;
      for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i) b.basis.at((k / 3) * r + i, j, k % 3) = q.image.at(i, j);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

json camera_json(const Camera& c) {
  std::vector<double> rot(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) rot[i * 3 + k] = c.rotation(i, k);
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
          {"height", c.height}, {"rotation", rot}, {"center", {c.center.x(), c.center.y(), c.center.z()}}};
}

Camera camera_from(const json& j) {
  Camera c;
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  c.width = j.at("width");
  c.height = j.at("height");
  const auto rot = j.at("rotation").get<std::vector<double>>();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) c.rotation(i, k) = rot.at(i * 3 + k);
  const auto ctr = j.at("center").get<std::vector<double>>();
  c.center = {ctr.at(0), ctr.at(1), ctr.at(2)};
  return c;
}

json quantized_json(const std::string& file, const QuantizedImage& q) {
  return {{"file", file}, {"scale", q.scale}, {"offset", q.offset}};
}

QuantizedImage read_quantized(const std::filesystem::path& dir, const json& j) {
  QuantizedImage q;
  q.image = read_png(dir / j.at("file").get<std::string>());
  q.scale = j.at("scale");
  q.offset = j.at("offset");
  return q;
}

}  // namespace

void save_baked(const std::filesystem::path& dir, const BakedMpi& b) {
  std::filesystem::create_directories(dir);
  json m;
  m["schema_version"] = std::to_string(kBakedSchemaMajor) + "." + std::to_string(kBakedSchemaMinor);
  m["bits"] = b.bits;
  m["width"] = b.reference.width;
  m["height"] = b.reference.height;
  m["planes"] = b.planes();
  m["sharing"] = b.sharing;
  m["groups"] = b.groups();
  m["coeffs"] = b.coeffs;
  m["basis_family"] = std::string(to_string(b.family));
  m["span"] = b.span;
  m["grid"] = b.grid;
  m["depths"] = b.depths;
  m["reference"] = camera_json(b.reference);
  json alpha = json::array();
  for (std::size_t k = 0; k < b.alpha.size(); ++k) {
    const std::string f = "alpha_" + std::to_string(k) + ".png";
    write_png(dir / f, b.alpha[k], b.bits);
    alpha.push_back(f);
  }
  m["alpha"] = {{"files", alpha}, {"packing", "plane-major-rgb"}};
  json k0 = json::array();
  for (int g = 0; g < b.groups(); ++g) {
    const std::string f = "k0_" + std::to_string(g) + ".png";
    write_png(dir / f, b.k0[g].image, b.bits);
    k0.push_back(quantized_json(f, b.k0[g]));
  }
  m["k0"] = k0;
  json coef = json::array();
  for (int g = 0; g < b.groups(); ++g) {
    json row = json::array();
    for (int k = 0; k < b.coeffs; ++k) {
      const std::string f = "coef_g" + std::to_string(g) + "_n" + std::to_string(k) + ".png";
      write_png(dir / f, b.coef[g][k].image, b.bits);
      row.push_back(quantized_json(f, b.coef[g][k]));
    }
    coef.push_back(row);
  }
  m["coef"] = coef;
  write_png(dir / "basis.png", b.basis, b.bits);
  m["basis"] = {{"file", "basis.png"}, {"tiles", (b.coeffs + 2) / 3}, {"scale", b.basis_scale},
                {"offset", b.basis_offset}};
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing baked manifest in " + dir.string());
}

BakedMpi load_baked(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
  const json m = json::parse(in);
  const std::string ver = m.at("schema_version");
  const int major = std::stoi(ver.substr(0, ver.find('.')));
  if (major != kBakedSchemaMajor)
    throw std::runtime_error("unsupported baked schema version " + ver + " (expected major " +
                             std::to_string(kBakedSchemaMajor) + ")");
  BakedMpi b;
  b.bits = m.at("bits");
  b.reference = camera_from(m.at("reference"));
  b.depths = m.at("depths").get<std::vector<double>>();
  b.sharing = m.at("sharing");
  b.coeffs = m.at("coeffs");
  b.family = parse_basis_family(m.at("basis_family").get<std::string>());
  b.span = m.at("span");
  b.grid = m.at("grid");
  for (const auto& f : m.at("alpha").at("files")) b.alpha.push_back(read_png(dir / f.get<std::string>()));
  for (const auto& k : m.at("k0")) b.k0.push_back(read_quantized(dir, k));
  for (const auto& row : m.at("coef")) {
    std::vector<QuantizedImage> r;
    for (const auto& c : row) r.push_back(read_quantized(dir, c));
    b.coef.push_back(std::move(r));
  }
  b.basis = read_png(dir / m.at("basis").at("file").get<std::string>());
  b.basis_scale = m.at("basis").at("scale").get<std::vector<double>>();
  b.basis_offset = m.at("basis").at("offset").get<std::vector<double>>();
  if (static_cast<int>(b.alpha.size()) != (b.planes() + 2) / 3 || static_cast<int>(b.k0.size()) != b.groups())
    throw std::runtime_error("baked manifest atlas counts are inconsistent");
  return b;
}

// ---------------------------------------------------------------------------

BakedRender render_baked(const BakedMpi& b, const Camera& cam, int workers) {
  const Camera& ref = b.reference;
  const int d_count = b.planes(), n = b.coeffs, w = ref.width, h = ref.height;
  std::vector<Homography> hom(d_count);
  for (int d = 0; d < d_count; ++d) hom[d] = plane_homography(ref, cam, b.depths[d]);
  const Eigen::Matrix3d to_ref = ref.rotation.transpose();
  const Eigen::Vector3d eye = to_ref * (cam.center - ref.center);
  const Eigen::Matrix3d k_inv = ref.K_inverse();

  BakedRender out{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1, 1.0)};
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (int y = 0; y < cam.height; ++y) {
    std::vector<double> hb(n);
    for (int x = 0; x < cam.width; ++x) {
      Rgb acc = Rgb::Zero();
      double trans = 1.0;
      bool covered = true;
      for (int d = d_count - 1; d >= 0; --d) {
        const Eigen::Vector2d u = apply_homography(hom[d], {x + 0.5, y + 0.5});
        if (!in_grid(w, h, u.x(), u.y())) continue;
        const BilinearTap tap = bilinear_tap(w, h, u.x(), u.y());
        double alpha = 0.0;
        for (int t = 0; t < 4; ++t) alpha += tap.weight[t] * b.alpha_at(d, tap.texel[t]);
        if (alpha == 0.0) continue;
        const int g = d / b.sharing;
        Rgb color = Rgb::Zero();
        for (int t = 0; t < 4; ++t)
          for (int c = 0; c < 3; ++c) color[c] += tap.weight[t] * b.k0[g].value(tap.texel[t] * 3 + c);
        if (n > 0) {
          const Eigen::Vector3d p = b.depths[d] * (k_inv * Eigen::Vector3d(u.x(), u.y(), 1.0));
          const Eigen::Vector3d v = (p - eye).normalized();
          double vx = v.x(), vy = v.y();
          if (std::abs(vx) > b.span || std::abs(vy) > b.span) covered = false;
          vx = std::clamp(vx, -b.span, b.span);
          vy = std::clamp(vy, -b.span, b.span);
          const double gx = (vx + b.span) / (2 * b.span) * (b.grid - 1);
          const double gy = (vy + b.span) / (2 * b.span) * (b.grid - 1);
          const int i0 = std::min(static_cast<int>(gx), b.grid - 2), j0 = std::min(static_cast<int>(gy), b.grid - 2);
          const double fx = gx - i0, fy = gy - j0;
          for (int k = 0; k < n; ++k)
            hb[k] = (1 - fx) * (1 - fy) * b.basis_node(k, i0, j0) + fx * (1 - fy) * b.basis_node(k, i0 + 1, j0) +
                    (1 - fx) * fy * b.basis_node(k, i0, j0 + 1) + fx * fy * b.basis_node(k, i0 + 1, j0 + 1);
          for (int k = 0; k < n; ++k) {
            const QuantizedImage& q = b.coef[g][k];
            for (int t = 0; t < 4; ++t)
              for (int c = 0; c < 3; ++c) color[c] += tap.weight[t] * q.value(tap.texel[t] * 3 + c) * hb[k];
          }
        }
        acc += (trans * alpha) * color;
        trans *= 1.0 - alpha;
      }
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = std::clamp(acc[c], 0.0, 1.0);
      out.coverage.at(x, y) = covered ? 1.0 : 0.0;
    }
  }
  return out;
}

ImageDiff image_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("image_diff inputs differ in size");
  ImageDiff d;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double e = std::abs(a.data[i] - b.data[i]);
    d.mean += e;
    d.max = std::max(d.max, e);
  }
  if (!a.data.empty()) d.mean /= static_cast<double>(a.data.size());
  return d;
}

}  // namespace nex
