#include <gtest/gtest.h>

#include <random>

#include "nex/render.hpp"
#include "oracles.hpp"

using namespace nex;

namespace {

Camera small_camera(int w = 8, int h = 6) {
  Camera c;
  c.fx = c.fy = 7.0;
  c.cx = w / 2.0;
  c.cy = h / 2.0;
  c.width = w;
  c.height = h;
  return c;
}

MpiModel random_model(const std::string& modes, int planes, int sharing, int n, std::uint64_t seed) {
  ModelOptions o;
  o.planes = planes;
  o.sharing = sharing;
  o.basis = BasisConfig::make(BasisFamily::learned, n);
  o.modes = ModelModes::parse(modes);
  o.shape = {12, 2, 8, 1};
  o.alpha_bias_init = 0.0;
  o.seed = seed;
  MpiModel m = make_model(small_camera(), 1.0, 5.0, o);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& p : m.parameters())
    if (p.group == kGroupBase)
      for (double& v : p.values) v = u(rng);
  for (auto& l : m.color_net.layers()) l.bias = l.bias.unaryExpr([&](double) { return 0.3 * u(rng); });
  return m;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(Render, ReferencePoseMatchesPerPlaneComposite) {
  // Explicit grids seen from the reference camera: every plane is sampled at the same texel.
  MpiModel m = random_model("Ex-Ex-Ex", 4, 2, 2, 5);
  const Camera& ref = m.reference;
  const Image img = render_image(m, ref, 1);
  for (int y = 0; y < ref.height; ++y)
    for (int x = 0; x < ref.width; ++x) {
      std::vector<double> a(4);
      std::vector<Eigen::Vector3d> c(4);
      const int texel = y * ref.width + x;
      const Eigen::Vector3d dir = ref.K_inverse() * Eigen::Vector3d(x + 0.5, y + 0.5, 1);
      const Eigen::Vector3d v = dir.normalized();
      const auto h = basis_values(m, v);
      for (int d = 0; d < 4; ++d) {
        const int g = d / 2;
        a[d] = sigmoid(m.alpha_grid[d].data[texel]);
        for (int ch = 0; ch < 3; ++ch) {
          double col = m.k0[g].data[texel * 3 + ch];
          for (int k = 0; k < 2; ++k) col += m.coeff_grid[g].data[texel * 6 + 3 * k + ch] * h[k];
          c[d][ch] = col;
        }
      }
      const Eigen::Vector3d want = oracle::composite_double_loop(a, c);
      for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(img.at(x, y, ch), std::clamp(want[ch], 0.0, 1.0), 1e-12);
    }
}

TEST(Render, ParallelMatchesSerialBitwise) {
  const MpiModel m = random_model("Im-Ex-Im", 4, 2, 3, 8);
  Camera cam = m.reference;
  cam.center = {0.05, -0.03, 0.02};
  const Image s = render_image_serial(m, cam);
  for (int w : {1, 2, 3}) EXPECT_EQ(render_image(m, cam, w).data, s.data);
}

TEST(Render, SingleRayMatchesBatchedRows) {
  const MpiModel m = random_model("Im-Im-Im", 4, 4, 2, 9);
  const Image img = render_image_serial(m, m.reference);
  for (auto [x, y] : {std::pair{0, 0}, {3, 2}, {7, 5}}) {
    const Rgb c = render_ray(m, m.reference, {x + 0.5, y + 0.5});
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(img.at(x, y, ch), std::clamp(c[ch], 0.0, 1.0), 1e-13);
  }
  EXPECT_THROW(render_ray(m, m.reference, {-1.0, 0.5}), std::out_of_range);
}

TEST(Render, PlanesOutsideReferenceAreTransparent) {
  const MpiModel m = random_model("Ex-Ex-Ex", 2, 1, 0, 10);
  Camera far_off = m.reference;
  far_off.center = {50.0, 0.0, 0.0};
  const Image img = render_image(m, far_off, 1);
  for (double v : img.data) EXPECT_EQ(v, 0.0);
}

namespace {

void check_batch_gradient(MpiModel m, const std::vector<double>& plane_indices) {
  Camera cam = m.reference;
  cam.center = {0.04, 0.02, -0.01};
  std::vector<Eigen::Vector2d> px{{1.3, 2.2}, {4.0, 3.5}, {6.7, 0.9}, {2.5, 5.5}};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Rgb> w(px.size());
  for (auto& v : w) v = {u(rng), u(rng), u(rng)};
  auto objective = [&] {
    const RayBatch b(m, cam, px, plane_indices);
    double s = 0;
    for (std::size_t i = 0; i < px.size(); ++i) s += w[i].dot(b.colors()[i]);
    return s;
  };
  const RayBatch batch(m, cam, px, plane_indices);
  ChunkGradient chunk;
  batch.backward(w, chunk);
  ModelGradient g = ModelGradient::zeros_like(m);
  accumulate(g, chunk);
  auto params = m.parameters();
  auto flat = g.flat();
  ASSERT_EQ(params.size(), flat.size());
  double worst = 0;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].values.size(); i += 1 + params[p].values.size() / 40) {
      const double fd = oracle::central_difference(objective, params[p].values[i], 1e-6);
      const double e = oracle::rel_err(flat[p][i], fd, 1e-5);
      worst = std::max(worst, e);
      EXPECT_LT(e, 1e-4) << params[p].name << "[" << i << "] analytic " << flat[p][i] << " fd " << fd;
    }
  EXPECT_LT(worst, 1e-4);
}

}  // namespace

TEST(RenderGradient, ImExIm) { check_batch_gradient(random_model("Im-Ex-Im", 4, 2, 2, 21), {}); }
TEST(RenderGradient, ExExEx) { check_batch_gradient(random_model("Ex-Ex-Ex", 4, 2, 2, 22), {}); }
TEST(RenderGradient, ImImIm) { check_batch_gradient(random_model("Im-Im-Im", 3, 3, 2, 23), {}); }
TEST(RenderGradient, ExImEx) { check_batch_gradient(random_model("Ex-Im-Ex", 4, 4, 1, 24), {}); }
TEST(RenderGradient, JitteredPlanes) {
  check_batch_gradient(random_model("Im-Ex-Im", 4, 2, 2, 25), {0.3, 0.8, 2.4, 2.6});
}
TEST(RenderGradient, FixedBasis) {
  MpiModel m = random_model("Im-Ex-Im", 4, 2, 0, 26);
  ModelOptions o;
  o.planes = 4;
  o.sharing = 2;
  o.basis = BasisConfig::make(BasisFamily::hsh, 4);
  o.shape = {12, 2, 8, 1};
  o.alpha_bias_init = 0.0;
  o.seed = 26;
  check_batch_gradient(make_model(m.reference, 1.0, 5.0, o), {});
}

TEST(RenderGradient, WorkerCountDoesNotChangeGradient) {
  const MpiModel m = random_model("Im-Ex-Im", 4, 2, 2, 30);
  std::vector<Eigen::Vector2d> px;
  for (int i = 0; i < 150; ++i) px.emplace_back(0.5 + (i * 7) % 8, 0.5 + (i * 5) % 6);
  std::vector<Rgb> w(px.size(), Rgb(0.3, -0.2, 0.1));
  std::vector<double> ref_flat;
  for (int workers : {1, 2, 4}) {
    const RayEvaluator ev(m, m.reference, px, {}, workers);
    ModelGradient g = ModelGradient::zeros_like(m);
    ev.backward(w, g, workers);
    std::vector<double> flat;
    for (auto s : g.flat()) flat.insert(flat.end(), s.begin(), s.end());
    if (ref_flat.empty()) ref_flat = flat;
    EXPECT_EQ(flat, ref_flat) << "workers " << workers;
  }
}

TEST(Render, UpsamplePlanes) {
  const MpiModel m = random_model("Im-Ex-Im", 4, 2, 2, 40);
  const MpiModel u = upsample_planes(m, 2);
  EXPECT_EQ(u.plane_count(), 8);
  EXPECT_EQ(u.sharing, 4);
  EXPECT_EQ(u.group_count(), m.group_count());
  EXPECT_EQ(u.norms.d.hi, 7.0);
  EXPECT_NEAR(u.planes.depths.front(), m.planes.depths.front(), 1e-12);
  EXPECT_NEAR(u.planes.depths.back(), m.planes.depths.back(), 1e-12);
  EXPECT_NO_THROW(render_image(u, u.reference, 1));
  EXPECT_THROW(upsample_planes(m, 3), std::invalid_argument);
  EXPECT_THROW(upsample_planes(random_model("Ex-Ex-Ex", 4, 2, 2, 41), 2), std::invalid_argument);
}
