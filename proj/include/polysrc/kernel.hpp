#pragma once

#include <array>
#include <vector>

#include "polysrc/types.hpp"

namespace polysrc::kernel {

/// Distances below this are treated as coincident points.
inline constexpr double kSingularEps = 1e-12;

struct ModelParams {
  int n = 2;       // polyharmonic order
  double k = 4.0;  // wavenumber
  double R = 1.2;  // measurement radius

  /// Throws ConfigError unless n >= 1, k > 0, R > 1.
  void validate() const;
};

/// kappa_j = k exp(i j pi / n), j = 0..n-1.
std::vector<cplx> split_roots(const ModelParams& params);

cplx helmholtz_green(const Vec3& x, const Vec3& y, cplx kappa);

cplx poly_green(const Vec3& x, const Vec3& y, const ModelParams& params);

/// Delta_x^m G(x, y), 0 <= m <= n-1.
cplx poly_green_laplacian(const Vec3& x, const Vec3& y, const ModelParams& params, int m);

/// nu . grad_x Delta_x^m G(x, y).
cplx poly_green_normal_derivative(const Vec3& x, const Vec3& y, const ModelParams& params,
                                  int m, const Vec3& nu);

/// Precomputed splitting coefficients. Every Delta^m G is radial, so the
/// evaluators take r = |x - y| and return the value and its r-derivative.
class PolyKernel {
 public:
  static constexpr int kMaxOrder = 8;

  explicit PolyKernel(const ModelParams& params);

  const ModelParams& params() const { return params_; }
  const std::vector<cplx>& roots() const { return roots_; }

  /// Delta^m G at distance r.
  cplx laplacian(double r, int m) const;

  /// d/dr Delta^m G at distance r.
  cplx laplacian_dr(double r, int m) const;

  /// Fills lap[m] = Delta^m G and dlap[m] = d/dr Delta^m G for m = 0..n-1.
  /// No singularity check; callers guarantee r > 0.
  void eval_all(double r, cplx* lap, cplx* dlap) const;

  /// Value of the cell-averaged G at its own cell centre: the 1/(4 pi r)
  /// part of each Phi_j integrated over the volume-equivalent ball plus the
  /// remaining smooth part at r = 0. Returned already multiplied by vol.
  cplx self_cell(double vol) const;

  /// Copy with every kernel value multiplied by s (used by fault injection
  /// in the self-test).
  PolyKernel scaled(double s) const;

 private:
  ModelParams params_;
  std::vector<cplx> roots_;
  // coef_[m][j] = (-1)^m kappa_j^{2m+2} / (n k^{2n}) * scale
  std::vector<std::array<cplx, kMaxOrder>> coef_;
};

}  // namespace polysrc::kernel
