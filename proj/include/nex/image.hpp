#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace nex {

/// Interleaved floating-point image, row-major, `channels` values per pixel.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::span<double> pixel(int x, int y) {
    return {data.data() + index(x, y), static_cast<std::size_t>(channels)};
  }
  std::span<const double> pixel(int x, int y) const {
    return {data.data() + index(x, y), static_cast<std::size_t>(channels)};
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool empty() const { return data.empty(); }
};

/// Decodes an 8- or 16-bit PNG (gray, gray+alpha, RGB, RGBA) to linear [0,1]
/// RGB. Alpha is dropped and gray is replicated.
Image read_png(const std::filesystem::path& path);

/// Writes 1, 3 or 4 channel images, clamping to [0,1] and rounding to the
/// nearest code. `bit_depth` is 8 or 16.
void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

/// Quantization as used when writing PNGs: round(clamp(v)*(2^bits-1)).
unsigned quantize_unit(double v, int bit_depth);
double dequantize_unit(unsigned code, int bit_depth);

}  // namespace nex
