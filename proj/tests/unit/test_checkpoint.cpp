#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "nex/checkpoint.hpp"
#include "nex/render.hpp"
#include "oracles.hpp"

using namespace nex;

namespace {

MpiModel sample_model(const std::string& modes) {
  Camera c;
  c.fx = c.fy = 7.0;
  c.cx = 4;
  c.cy = 3;
  c.width = 8;
  c.height = 6;
  ModelOptions o;
  o.planes = 4;
  o.sharing = 2;
  o.basis = BasisConfig::make(BasisFamily::learned, 3);
  o.modes = ModelModes::parse(modes);
  o.shape = {12, 2, 8, 1};
  o.margin = 1;
  o.seed = 4;
  MpiModel m = make_model(c, 1.0, 5.0, o);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& p : m.parameters())
    for (double& v : p.values) v += 0.1 * u(rng);
  return m;
}

std::vector<double> flatten(MpiModel& m) {
  std::vector<double> out;
  for (auto& p : m.parameters()) out.insert(out.end(), p.values.begin(), p.values.end());
  return out;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
  for (const char* modes : {"Im-Ex-Im", "Ex-Ex-Ex", "Im-Im-Im"}) {
    MpiModel m = sample_model(modes);
    AdamState adam;
    adam.reset(m.parameters());
    adam.step = 7;
    for (auto& v : adam.m)
      for (double& x : v) x = 0.25;
    const auto dir = oracle::temp_dir("ckpt");
    save_checkpoint(dir / "m.ckpt", m, &adam);
    Checkpoint back = load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(flatten(back.model), flatten(m)) << modes;
    EXPECT_EQ(back.model.modes.label(), modes);
    EXPECT_EQ(back.model.planes.depths, m.planes.depths);
    ASSERT_TRUE(back.adam.has_value());
    EXPECT_EQ(back.adam->step, 7);
    EXPECT_EQ(back.adam->m, adam.m);
    EXPECT_EQ(render_image_serial(back.model, back.model.reference).data,
              render_image_serial(m, m.reference).data);
  }
}

TEST(Checkpoint, WithoutOptimizerState) {
  MpiModel m = sample_model("Im-Ex-Im");
  const auto dir = oracle::temp_dir("ckpt_noadam");
  save_checkpoint(dir / "m.ckpt", m);
  EXPECT_FALSE(load_checkpoint(dir / "m.ckpt").adam.has_value());
}

TEST(Checkpoint, RejectsBadFiles) {
  const auto dir = oracle::temp_dir("ckpt_bad");
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);
  std::ofstream(dir / "junk.ckpt") << "NOTACKPT-and-more";
  EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), std::runtime_error);

  MpiModel m = sample_model("Im-Ex-Im");
  save_checkpoint(dir / "good.ckpt", m);
  std::string bytes;
  {
    std::ifstream in(dir / "good.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::string wrong_version = bytes;
  wrong_version[8] = 99;
  std::ofstream(dir / "v.ckpt", std::ios::binary) << wrong_version;
  try {
    load_checkpoint(dir / "v.ckpt");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 16);
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), std::runtime_error);
}
