#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "nex/export.hpp"
#include "nex/render.hpp"
#include "oracles.hpp"

using namespace nex;

namespace {

Camera small_camera() {
  Camera c;
  c.fx = c.fy = 9.0;
  c.cx = 5;
  c.cy = 4;
  c.width = 10;
  c.height = 8;
  return c;
}

MpiModel explicit_model(int planes, int sharing, int n, std::uint64_t seed) {
  ModelOptions o;
  o.planes = planes;
  o.sharing = sharing;
  o.basis = BasisConfig::make(BasisFamily::learned, n);
  o.modes = ModelModes::parse("Ex-Ex-Ex");
  o.shape = {12, 2, 8, 1};
  o.seed = seed;
  MpiModel m = make_model(small_camera(), 1.0, 5.0, o);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& g : m.alpha_grid)
    for (double& v : g.data) v = 2 * u(rng);
  for (auto& g : m.k0)
    for (double& v : g.data) v = 0.5 + 0.4 * u(rng);
  for (auto& g : m.coeff_grid)
    for (double& v : g.data) v = 0.2 * u(rng);
  return m;
}

}  // namespace

TEST(Export, ConstantModelIsExact) {
  MpiModel m = explicit_model(4, 2, 2, 1);
  for (auto& g : m.alpha_grid) std::fill(g.data.begin(), g.data.end(), 0.3);
  for (auto& g : m.k0) std::fill(g.data.begin(), g.data.end(), 0.6);
  for (auto& g : m.coeff_grid) std::fill(g.data.begin(), g.data.end(), 0.0);
  Camera cam = m.reference;
  cam.center = {0.05, 0.02, 0.0};
  const Image want = render_image(m, cam, 1);
  const BakedRender got = render_baked(bake(m, {.bits = 16}), cam, 1);
  // Only the alpha value itself is quantized.
  EXPECT_LT(image_diff(want, got.image).max, 1e-4);
}

TEST(Export, SixteenBitsShrinksQuantizationError) {
  const MpiModel m = explicit_model(6, 2, 0, 2);
  const Image want = render_image(m, m.reference, 1);
  const ImageDiff d8 = image_diff(want, render_baked(bake(m, {.bits = 8}), m.reference, 1).image);
  const ImageDiff d16 = image_diff(want, render_baked(bake(m, {.bits = 16}), m.reference, 1).image);
  EXPECT_GT(d8.max, 0.0);
  EXPECT_LE(d8.max, 4.0 / 255);
  EXPECT_GE(d8.max, 8 * d16.max);
}

TEST(Export, TransparentPlanesRenderBlack) {
  MpiModel m = explicit_model(4, 2, 2, 3);
  for (auto& g : m.alpha_grid) std::fill(g.data.begin(), g.data.end(), -50.0);
  const BakedRender r = render_baked(bake(m), m.reference, 1);
  for (double v : r.image.data) EXPECT_EQ(v, 0.0);
  for (double v : r.coverage.data) EXPECT_EQ(v, 1.0);
}

TEST(Export, CoverageClearsOutsideSpan) {
  const MpiModel m = explicit_model(2, 1, 1, 4);
  const BakedRender r = render_baked(bake(m, {.span = 0.1}), m.reference, 1);
  EXPECT_EQ(r.coverage.at(5, 4), 1.0);
  EXPECT_EQ(r.coverage.at(0, 0), 0.0);
}

TEST(Export, BasisCenterNodeMatchesNetwork) {
  ModelOptions o;
  o.planes = 2;
  o.sharing = 1;
  o.basis = BasisConfig::make(BasisFamily::learned, 4);
  o.shape = {12, 2, 16, 2};
  o.seed = 5;
  const MpiModel m = make_model(small_camera(), 1.0, 5.0, o);
  const BakedMpi b = bake(m, {.grid = 9, .bits = 16});
  const std::vector<double> enc = encode_view(0.0, 0.0);
  const Eigen::VectorXd g = m.basis_net.forward(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(enc.data(), 12)));
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(b.basis_node(k, 4, 4), g[k], 0.5 * b.basis_scale[k] / 65535 + 1e-12);
}

TEST(Export, SaveLoadAndAtlasCounts) {
  const MpiModel m = explicit_model(6, 2, 4, 6);
  const BakedMpi b = bake(m, {.grid = 8, .bits = 8});
  const auto dir = oracle::temp_dir("baked");
  save_baked(dir, b);
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("schema_version"), "1.0");
  EXPECT_EQ(j.at("alpha").at("files").size(), 2u);
  EXPECT_EQ(j.at("k0").size(), 3u);
  EXPECT_EQ(j.at("coef").size(), 3u);
  EXPECT_EQ(j.at("coef")[0].size(), 4u);
  EXPECT_EQ(j.at("basis").at("tiles"), 2);
  for (int g = 0; g < 3; ++g)
    for (int k = 0; k < 4; ++k)
      EXPECT_TRUE(std::filesystem::exists(dir / ("coef_g" + std::to_string(g) + "_n" + std::to_string(k) + ".png")));
  const Image atlas = read_png(dir / "basis.png");
  EXPECT_EQ(atlas.width, 16);
  EXPECT_EQ(atlas.height, 8);

  const BakedMpi back = load_baked(dir);
  Camera cam = m.reference;
  cam.center = {-0.04, 0.03, 0.01};
  EXPECT_EQ(render_baked(back, cam, 1).image.data, render_baked(b, cam, 1).image.data);
}

TEST(Export, RejectsUnknownSchemaMajor) {
  const auto dir = oracle::temp_dir("baked_v2");
  save_baked(dir, bake(explicit_model(2, 1, 1, 7)));
  nlohmann::json j;
  {
    std::ifstream in(dir / "manifest.json");
    j = nlohmann::json::parse(in);
  }
  j["schema_version"] = "2.0";
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_THROW(load_baked(dir), std::runtime_error);
  j["schema_version"] = "1.7";
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_NO_THROW(load_baked(dir));
}

TEST(Export, OptionValidation) {
  const MpiModel m = explicit_model(2, 1, 1, 8);
  EXPECT_THROW(bake(m, {.bits = 12}), std::invalid_argument);
  EXPECT_THROW(bake(m, {.grid = 1}), std::invalid_argument);
  EXPECT_THROW(bake(m, {.span = 1.0}), std::invalid_argument);
  EXPECT_THROW(image_diff(Image(2, 2, 3), Image(2, 3, 3)), std::invalid_argument);
}
