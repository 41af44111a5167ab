#include "nex/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nex {

std::string_view to_string(BasisFamily f) {
  switch (f) {
    case BasisFamily::learned: return "learned";
    case BasisFamily::sh: return "sh";
    case BasisFamily::hsh: return "hsh";
    case BasisFamily::jh: return "jh";
    case BasisFamily::fs: return "fs";
    case BasisFamily::ts: return "ts";
  }
  return "?";
}

BasisFamily parse_basis_family(std::string_view s) {
  for (auto f : {BasisFamily::learned, BasisFamily::sh, BasisFamily::hsh, BasisFamily::jh, BasisFamily::fs,
                 BasisFamily::ts})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown basis family '" + std::string(s) + "'");
}

BasisConfig BasisConfig::make(BasisFamily family, int count) {
  BasisConfig c;
  c.family = family;
  c.count = count;
  switch (family) {
    case BasisFamily::sh: c.a = -1.0; c.b = 0.0; break;
    case BasisFamily::hsh: c.a = 0.0; c.b = 0.0; break;
    case BasisFamily::jh: c.a = 1.0 / std::numbers::sqrt2; c.b = 2.0; break;
    default: c.a = -1.0; c.b = 0.0; break;
  }
  return c;
}

BasisConfig BasisConfig::jacobi_shifted(int count, double a, double b) {
  BasisConfig c;
  c.family = BasisFamily::jh;
  c.count = count;
  c.a = a;
  c.b = b;
  c.validate();
  return c;
}

void BasisConfig::validate() const {
  if (count < 0) throw std::invalid_argument("basis count must be >= 0");
  if (family == BasisFamily::sh && (a != -1.0 || b != 0.0))
    throw std::invalid_argument("SH requires (a, b) = (-1, 0)");
  if (family == BasisFamily::hsh && (a != 0.0 || b != 0.0))
    throw std::invalid_argument("HSH requires (a, b) = (0, 0)");
  if (family == BasisFamily::jh && !(a >= -1.0 && a < 1.0 && b >= 0.0))
    throw std::invalid_argument("JH requires a in [-1, 1) and b >= 0");
}

ComplexValue complex_kernel(double a, int m, const Eigen::Vector3d& v) {
  if (m < 1) throw std::invalid_argument("kernel order must be >= 1");
  if (!(v.z() > a)) throw BasisDomainError("direction outside basis domain (v_z <= a)");
  const double s = std::sqrt((v.z() - a) / (v.z() + 1.0)) / (1.0 - a);
  double re = v.x() * s, im = v.y() * s;
  double out_re = 1.0, out_im = 0.0;
  // Binary exponentiation; powers of two reduce to repeated squaring.
  for (int e = m; e > 0; e >>= 1) {
    if (e & 1) {
      const double r = out_re * re - out_im * im;
      out_im = out_re * im + out_im * re;
      out_re = r;
    }
    const double r2 = re * re - im * im;
    im = 2.0 * re * im;
    re = r2;
  }
  return {out_re, out_im};
}

double radial_P(double a, double b, int m, const Eigen::Vector3d& v) {
  if (a == 1.0) throw std::invalid_argument("radial_P undefined for a = 1");
  if (m < 0) throw std::invalid_argument("radial_P order must be >= 0");
  return (v.z() - 1.0) / (1.0 - a) + (m + 1.0) / (b + 2.0 * m + 2.0);
}

namespace {

void fill_ladder(const BasisConfig& cfg, const Eigen::Vector3d& v, std::span<double> out) {
  const int n = cfg.count;
  int idx = 0;
  for (int level = 0; idx < n; ++level) {
    const int m = 1 << level;
    const ComplexValue k = complex_kernel(cfg.a, m, v);
    const double p = radial_P(cfg.a, cfg.b, m, v);
    const double vals[4] = {k.re, k.im, p * k.re, p * k.im};
    for (int j = 0; j < 4 && idx < n; ++j) out[idx++] = vals[j];
  }
}

void fill_fourier(int n, const Eigen::Vector3d& v, std::span<double> out) {
  int idx = 0;
  for (int level = -1; idx < n; ++level) {
    const double w = std::ldexp(std::numbers::pi, level);
    const double vals[4] = {std::cos(w * v.x()), std::sin(w * v.x()), std::cos(w * v.y()), std::sin(w * v.y())};
    for (int j = 0; j < 4 && idx < n; ++j) out[idx++] = vals[j];
  }
}

void fill_taylor(int n, const Eigen::Vector3d& v, std::span<double> out) {
  int idx = 0;
  for (int degree = 1; idx < n; ++degree) {
    // Graded lexicographic: x^degree, x^(degree-1) y, ..., y^degree.
    for (int py = 0; py <= degree && idx < n; ++py)
      out[idx++] = std::pow(v.x(), degree - py) * std::pow(v.y(), py);
  }
}

}  // namespace

bool eval_fixed_basis_masked(const BasisConfig& cfg, const Eigen::Vector3d& v, std::span<double> out) {
  if (out.size() < static_cast<std::size_t>(cfg.count)) throw std::invalid_argument("basis output too small");
  switch (cfg.family) {
    case BasisFamily::learned:
      throw std::invalid_argument("learned basis has no closed form");
    case BasisFamily::sh:
    case BasisFamily::hsh:
    case BasisFamily::jh:
      if (!(v.z() > cfg.a)) {
        std::fill_n(out.begin(), cfg.count, 0.0);
        return false;
      }
      fill_ladder(cfg, v, out);
      return true;
    case BasisFamily::fs:
      fill_fourier(cfg.count, v, out);
      return true;
    case BasisFamily::ts:
      fill_taylor(cfg.count, v, out);
      return true;
  }
  return false;
}

std::vector<double> eval_fixed_basis(const BasisConfig& cfg, const Eigen::Vector3d& v) {
  std::vector<double> out(cfg.count);
  if (!eval_fixed_basis_masked(cfg, v, out))
    throw BasisDomainError("direction outside basis domain (v_z <= a)");
  return out;
}

namespace {

// Generalized binomial coefficient C(top, k) for real `top`.
double binomial(double top, int k) {
  double r = 1.0;
  for (int j = 0; j < k; ++j) r *= (top - j) / (j + 1);
  return r;
}

}  // namespace

double legendre(int n, double x) {
  if (n < 0) throw std::invalid_argument("degree must be >= 0");
  const double lo = (x - 1.0) / 2.0, hi = (x + 1.0) / 2.0;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double c = binomial(n, i);
    sum += c * c * std::pow(lo, i) * std::pow(hi, n - i);
  }
  return sum;
}

double jacobi(int n, double b, double x) {
  if (n < 0) throw std::invalid_argument("degree must be >= 0");
  const double lo = (x - 1.0) / 2.0, hi = (x + 1.0) / 2.0;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i)
    sum += binomial(n, n - i) * binomial(n + b, i) * std::pow(lo, i) * std::pow(hi, n - i);
  return sum;
}

}  // namespace nex
