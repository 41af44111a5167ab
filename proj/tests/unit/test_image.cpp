#include <gtest/gtest.h>

#include <fstream>

#include "nex/image.hpp"
#include "oracles.hpp"

using namespace nex;

TEST(Image, QuantizeRoundsToNearestCode) {
  EXPECT_EQ(quantize_unit(0.0, 8), 0u);
  EXPECT_EQ(quantize_unit(1.0, 8), 255u);
  EXPECT_EQ(quantize_unit(2.0, 8), 255u);
  EXPECT_EQ(quantize_unit(-0.1, 16), 0u);
  EXPECT_EQ(quantize_unit(0.5, 8), 128u);
  EXPECT_EQ(quantize_unit(0.5, 16), 32768u);
  EXPECT_DOUBLE_EQ(dequantize_unit(255, 8), 1.0);
  EXPECT_DOUBLE_EQ(dequantize_unit(1, 16), 1.0 / 65535);
}

TEST(Image, PngRoundTripAtBothDepths) {
  const auto dir = oracle::temp_dir("image");
  Image img(5, 3, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i % 17) / 16.0;
  for (int bits : {8, 16}) {
    const auto path = dir / ("rt" + std::to_string(bits) + ".png");
    write_png(path, img, bits);
    const Image back = read_png(path);
    ASSERT_TRUE(back.same_shape(img));
    const double step = 1.0 / ((1 << bits) - 1);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      EXPECT_NEAR(back.data[i], img.data[i], 0.5 * step + 1e-12);
      EXPECT_EQ(back.data[i], dequantize_unit(quantize_unit(img.data[i], bits), bits));
    }
  }
}

TEST(Image, GrayIsReplicated) {
  const auto dir = oracle::temp_dir("image_gray");
  Image g(2, 2, 1);
  g.data = {0.0, 0.25, 0.5, 1.0};
  write_png(dir / "g.png", g, 16);
  const Image back = read_png(dir / "g.png");
  ASSERT_EQ(back.channels, 3);
  for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(back.at(1, 0, ch), 0.25, 1e-5);
}

TEST(Image, Errors) {
  const auto dir = oracle::temp_dir("image_err");
  EXPECT_THROW(read_png(dir / "missing.png"), std::runtime_error);
  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(read_png(dir / "junk.png"), std::runtime_error);
  EXPECT_THROW(write_png(dir / "x.png", Image(2, 2, 3), 12), std::invalid_argument);
  EXPECT_THROW(write_png(dir / "x.png", Image(2, 2, 2), 8), std::invalid_argument);
}
