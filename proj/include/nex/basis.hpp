#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nex {

enum class BasisFamily { learned, sh, hsh, jh, fs, ts };

std::string_view to_string(BasisFamily f);
BasisFamily parse_basis_family(std::string_view s);

/// Raised when a direction falls outside a family's polar domain (v_z <= a).
class BasisDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct BasisConfig {
  BasisFamily family = BasisFamily::learned;
  int count = 8;  ///< N; zero disables view dependence
  double a = -1.0;
  double b = 0.0;

  static BasisConfig make(BasisFamily family, int count);
  static BasisConfig jacobi_shifted(int count, double a, double b);
  /// Throws std::invalid_argument on a family/parameter mismatch.
  void validate() const;
  bool uses_kernel_ladder() const {
    return family == BasisFamily::sh || family == BasisFamily::hsh || family == BasisFamily::jh;
  }
};

struct ComplexValue {
  double re = 0.0;
  double im = 0.0;
};

/// ((v_x s + i v_y s) / (1 - a))^m with s = sqrt((v_z - a)/(v_z + 1)).
ComplexValue complex_kernel(double a, int m, const Eigen::Vector3d& v);

/// (v_z - 1)/(1 - a) + (m + 1)/(b + 2m + 2).
double radial_P(double a, double b, int m, const Eigen::Vector3d& v);

/// First `cfg.count` entries of the family's canonical ordering. Throws
/// BasisDomainError outside the domain.
std::vector<double> eval_fixed_basis(const BasisConfig& cfg, const Eigen::Vector3d& v);

/// Training-time variant: writes `cfg.count` values into `out` and returns
/// false (with `out` zeroed) when `v` is outside the domain.
bool eval_fixed_basis_masked(const BasisConfig& cfg, const Eigen::Vector3d& v, std::span<double> out);

double legendre(int n, double x);
/// Jacobi polynomial with first parameter 0 and second parameter `b`;
/// jacobi(n, 0, x) == legendre(n, x).
double jacobi(int n, double b, double x);

}  // namespace nex
