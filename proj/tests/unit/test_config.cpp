#include <gtest/gtest.h>

#include <fstream>

#include "nex/config.hpp"
#include "oracles.hpp"

using namespace nex;

TEST(Config, OverlaysOnlyPresentKeys) {
  TrainConfig base;
  base.epochs = 17;
  const TrainConfig c = parse_train_config(
      R"({"triplets": 5, "model": {"planes": 12, "sharing": 3, "basis": "hsh", "coeffs": 5,
          "modes": "Ex-Im-Ex", "shape": {"color_width": 32}}})",
      base);
  EXPECT_EQ(c.epochs, 17);
  EXPECT_EQ(c.triplets, 5);
  EXPECT_EQ(c.omega, base.omega);
  EXPECT_EQ(c.model.planes, 12);
  EXPECT_EQ(c.model.sharing, 3);
  EXPECT_EQ(c.model.basis.family, BasisFamily::hsh);
  EXPECT_EQ(c.model.basis.count, 5);
  EXPECT_EQ(c.model.modes.label(), "Ex-Im-Ex");
  EXPECT_EQ(c.model.shape.color_width, 32);
  EXPECT_EQ(c.model.shape.basis_width, base.model.shape.basis_width);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_train_config(R"({"epoch": 3})"), std::invalid_argument);
  EXPECT_THROW(parse_train_config(R"({"model": {"plane": 3}})"), std::invalid_argument);
  EXPECT_THROW(parse_train_config(R"({"model": {"shape": {"depth": 3}}})"), std::invalid_argument);
  EXPECT_THROW(parse_train_config(R"({"epochs": "many"})"), std::invalid_argument);
  EXPECT_THROW(parse_train_config(R"({"model": {"spacing": "log"}})"), std::invalid_argument);
  EXPECT_THROW(parse_train_config("[1, 2]"), std::invalid_argument);
  EXPECT_THROW(parse_train_config("{"), std::invalid_argument);
  EXPECT_THROW(load_train_config("/nonexistent/cfg.json"), std::runtime_error);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig c;
  c.epochs = 9;
  c.gamma = 0.125;
  c.seed = 42;
  c.gradient_mask = true;
  c.model.spacing = PlaneSpacing::depth;
  c.model.basis = BasisConfig::make(BasisFamily::fs, 8);
  c.model.margin = 3;
  const auto dir = oracle::temp_dir("config");
  std::ofstream(dir / "c.json") << train_config_json(c);
  const TrainConfig r = load_train_config(dir / "c.json");
  EXPECT_EQ(train_config_json(r), train_config_json(c));
  EXPECT_EQ(r.epochs, 9);
  EXPECT_EQ(r.seed, 42u);
  EXPECT_EQ(r.model.spacing, PlaneSpacing::depth);
  EXPECT_EQ(r.model.basis.family, BasisFamily::fs);
  EXPECT_EQ(r.model.margin, 3);
}
