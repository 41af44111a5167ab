#include "nex/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nex {

namespace {

void check_same(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("metric inputs differ in size");
  if (a.empty()) throw std::invalid_argument("metric inputs are empty");
}

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(2 * kRadius + 1);
  double sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) sum += k[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
  for (double& v : k) v /= sum;
  return k;
}

// Half-sample symmetric reflection (d c b a | a b c d | d c b a).
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Separable Gaussian filter of a single-channel plane.
std::vector<double> blur(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i) s += k[i + kRadius] * src[y * w + reflect(x + i, w)];
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i) s += k[i + kRadius] * tmp[reflect(y + i, h) * w + x];
      out[y * w + x] = s;
    }
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_same(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(e));
}

double ssim(const Image& a, const Image& b) {
  check_same(a, b);
  const int w = a.width, h = a.height;
  if (w < 2 * kRadius + 1 || h < 2 * kRadius + 1) throw std::invalid_argument("SSIM needs images of at least 11x11");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto k = gaussian_kernel();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * a.channels + ch];
      y[i] = b.data[i * b.channels + ch];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto ux = blur(x, w, h, k), uy = blur(y, w, h, k);
    const auto uxx = blur(xx, w, h, k), uyy = blur(yy, w, h, k), uxy = blur(xy, w, h, k);
    double sum = 0.0;
    int count = 0;
    for (int py = kRadius; py < h - kRadius; ++py)
      for (int px = kRadius; px < w - kRadius; ++px) {
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        const double vx = uxx[i] - ux[i] * ux[i];
        const double vy = uyy[i] - uy[i] * uy[i];
        const double cxy = uxy[i] - ux[i] * uy[i];
        const double num = (2 * ux[i] * uy[i] + c1) * (2 * cxy + c2);
        const double den = (ux[i] * ux[i] + uy[i] * uy[i] + c1) * (vx + vy + c2);
        sum += num / den;
        ++count;
      }
    total += sum / count;
  }
  return total / a.channels;
}

}  // namespace nex
