#include <gtest/gtest.h>

#include <fstream>

#include "nex/scene_io.hpp"
#include "oracles.hpp"

using namespace nex;

namespace {

// Manifest with `n` 4x3 images and no explicit splits.
std::filesystem::path write_manifest(int n, const std::string& extra = "", const std::string& policy = "") {
  const auto dir = oracle::temp_dir("scene");
  std::ofstream m(dir / "manifest.json");
  m << "{\"near\": 1.5, \"far\": \"inf\"" << extra;
  if (!policy.empty()) m << ", \"split_policy\": \"" << policy << "\"";
  m << ", \"images\": [";
  for (int i = 0; i < n; ++i) {
    Image img(4, 3, 3, 0.1 * i);
    write_png(dir / ("im" + std::to_string(i) + ".png"), img, 16);
    m << (i ? "," : "") << "{\"file\": \"im" << i << ".png\", \"fx\": 5, \"fy\": 5, \"cx\": 2, \"cy\": 1.5,"
      << "\"width\": 4, \"height\": 3, \"rotation\": [1,0,0,0,1,0,0,0,1], \"center\": [" << 0.1 * i << ",0,0]}";
  }
  m << "]}";
  return dir / "manifest.json";
}

}  // namespace

TEST(SceneIo, LoadsManifestWithDefaultSplit) {
  const SceneDataset ds = load_scene(write_manifest(10));
  ASSERT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.near, 1.5);
  EXPECT_TRUE(std::isinf(ds.far));
  EXPECT_EQ(ds.test_indices(), (std::vector<int>{0, 8}));
  EXPECT_EQ(ds.train_indices().size(), 8u);
  EXPECT_NEAR(ds.images[3].at(1, 1, 2), 0.3, 1e-4);
  EXPECT_FALSE(ds.is_test[ds.reference_index]);
  // Centroid is x = 0.45, between the views at 0.4 and 0.5.
  EXPECT_TRUE(ds.reference_index == 4 || ds.reference_index == 5);
}

TEST(SceneIo, SplitPolicyAndReference) {
  const SceneDataset none = load_scene(write_manifest(9, ", \"reference\": 2", "none"));
  EXPECT_TRUE(none.test_indices().empty());
  EXPECT_EQ(none.reference_index, 2);
  EXPECT_THROW(load_scene(write_manifest(3, "", "random")), std::invalid_argument);
  EXPECT_THROW(load_scene(write_manifest(3, ", \"reference\": 5")), std::invalid_argument);
}

TEST(SceneIo, SaveLoadRoundTrip) {
  SceneDataset ds = load_scene(write_manifest(4));
  ds.is_test = {false, true, false, true};
  ds.reference_index = 2;
  const auto dir = oracle::temp_dir("scene_rt");
  save_scene(dir, ds);
  const SceneDataset back = load_scene(dir / "manifest.json");
  EXPECT_EQ(back.is_test, ds.is_test);
  EXPECT_EQ(back.reference_index, 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.images[i].data, ds.images[i].data);
    EXPECT_EQ(back.cameras[i].center, ds.cameras[i].center);
  }
}

TEST(SceneIo, Errors) {
  const auto dir = oracle::temp_dir("scene_err");
  EXPECT_THROW(load_scene(dir / "none.json"), std::runtime_error);
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_THROW(load_scene(dir / "bad.json"), std::invalid_argument);
  std::ofstream(dir / "empty.json") << R"({"near": 1, "far": 2, "images": []})";
  EXPECT_THROW(load_scene(dir / "empty.json"), std::invalid_argument);
  std::ofstream(dir / "missing.json")
      << R"({"near": 1, "far": 2, "images": [{"file": "x.png", "fx": 1, "fy": 1, "cx": 0, "cy": 0,
            "width": 2, "height": 2, "rotation": [1,0,0,0,1,0,0,0,1], "center": [0,0,0]}]})";
  EXPECT_THROW(load_scene(dir / "missing.json"), std::runtime_error);
  write_png(dir / "cam7.png", Image(2, 2, 3), 8);
  std::ofstream(dir / "norm.json")
      << R"({"near": 1, "far": 2, "images": [{"file": "cam7.png", "fx": 1, "fy": 1, "cx": 0, "cy": 0,
            "width": 2, "height": 2, "rotation": [1.01,0,0,0,1,0,0,0,1], "center": [0,0,0]}]})";
  try {
    load_scene(dir / "norm.json");
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("cam7.png"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "rot.json")
      << R"({"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 2, "height": 2,
            "rotation": [2,0,0,0,1,0,0,0,1], "center": [0,0,0]})";
  EXPECT_THROW(load_camera(dir / "rot.json"), std::invalid_argument);
}

TEST(SceneIo, LoadCamera) {
  const auto dir = oracle::temp_dir("pose");
  std::ofstream(dir / "p.json") << R"({"fx": 10, "fy": 11, "cx": 4, "cy": 3, "width": 8, "height": 6,
      "rotation": [1,0,0,0,1,0,0,0,1], "center": [0.1, -0.2, 0.3]})";
  const Camera c = load_camera(dir / "p.json");
  EXPECT_EQ(c.fy, 11.0);
  EXPECT_EQ(c.width, 8);
  EXPECT_EQ(c.center, Eigen::Vector3d(0.1, -0.2, 0.3));
}

TEST(PlaneStack, BackToFrontSpacing) {
  const PlaneStack inv = plane_depths(1.0, 4.0, 4, PlaneSpacing::inverse_depth);
  ASSERT_EQ(inv.size(), 4);
  EXPECT_NEAR(inv.depths[0], 4.0, 1e-12);
  EXPECT_NEAR(inv.depths[3], 1.0, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(1 / inv.depths[i + 1] - 1 / inv.depths[i], 0.25, 1e-12);
  EXPECT_NEAR(inv.depth_at(0.5), 1.0 / (0.25 + 0.125), 1e-12);

  const PlaneStack lin = plane_depths(1.0, 4.0, 4, PlaneSpacing::depth);
  EXPECT_EQ(lin.depths, (std::vector<double>{4.0, 3.0, 2.0, 1.0}));
  EXPECT_NEAR(lin.depth_at(2.5), 1.5, 1e-12);

  const PlaneStack open = plane_depths(1.0, kInfinity, 3, PlaneSpacing::inverse_depth);
  EXPECT_TRUE(std::isinf(open.depths[0]));
  EXPECT_EQ(open.finite_depth(0), 1.0 / kInverseDepthEpsilon);
  EXPECT_NEAR(open.depths[1], 2.0, 1e-12);
  EXPECT_THROW(plane_depths(1.0, kInfinity, 3, PlaneSpacing::depth), std::invalid_argument);
  EXPECT_THROW(plane_depths(2.0, 1.0, 3, PlaneSpacing::depth), std::invalid_argument);
}
