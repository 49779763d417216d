#include "polysrc/kernel.hpp"

#include <cmath>
#include <string>

#include "polysrc/errors.hpp"

namespace polysrc::kernel {

namespace {

double checked_distance(const Vec3& x, const Vec3& y) {
  const double r = (x - y).norm();
  if (!(r >= kSingularEps)) {
    throw SingularPointError("kernel evaluated at coincident points (|x-y| = " +
                             std::to_string(r) + ")");
  }
  return r;
}

void check_order(const ModelParams& p, int m) {
  if (m < 0 || m > p.n - 1) {
    throw ConfigError("Laplacian order m = " + std::to_string(m) + " outside [0, " +
                      std::to_string(p.n - 1) + "]");
  }
}

}  // namespace

void ModelParams::validate() const {
  if (n < 1) throw ConfigError("model.n must be >= 1");
  if (n > PolyKernel::kMaxOrder) {
    throw ConfigError("model.n must be <= " + std::to_string(PolyKernel::kMaxOrder));
  }
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("model.k must be positive");
  if (!(R > 1.0) || !std::isfinite(R)) throw ConfigError("model.R must be > 1");
}

std::vector<cplx> split_roots(const ModelParams& params) {
  params.validate();
  std::vector<cplx> roots(params.n);
  roots[0] = cplx(params.k, 0.0);
  for (int j = 1; j < params.n; ++j) {
    roots[j] = 2 * j == params.n ? cplx(0.0, params.k) : std::polar(params.k, j * kPi / params.n);
  }
  return roots;
}

cplx helmholtz_green(const Vec3& x, const Vec3& y, cplx kappa) {
  const double r = checked_distance(x, y);
  return std::exp(kI * kappa * r) / (4.0 * kPi * r);
}

cplx poly_green(const Vec3& x, const Vec3& y, const ModelParams& params) {
  return poly_green_laplacian(x, y, params, 0);
}

cplx poly_green_laplacian(const Vec3& x, const Vec3& y, const ModelParams& params, int m) {
  check_order(params, m);
  const double r = checked_distance(x, y);
  return PolyKernel(params).laplacian(r, m);
}

cplx poly_green_normal_derivative(const Vec3& x, const Vec3& y, const ModelParams& params,
                                  int m, const Vec3& nu) {
  check_order(params, m);
  const double r = checked_distance(x, y);
  const double proj = nu.dot(x - y) / r;
  if (proj == 0.0) return 0.0;
  return PolyKernel(params).laplacian_dr(r, m) * proj;
}

PolyKernel::PolyKernel(const ModelParams& params)
    : params_(params), roots_(split_roots(params)), coef_(params.n) {
  const double k2n = std::pow(params.k, 2 * params.n);
  for (int m = 0; m < params.n; ++m) {
    for (int j = 0; j < params.n; ++j) {
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      coef_[m][j] = sign * std::pow(roots_[j], 2 * m + 2) / (params.n * k2n);
    }
  }
}

cplx PolyKernel::laplacian(double r, int m) const {
  check_order(params_, m);
  cplx acc = 0.0;
  for (int j = 0; j < params_.n; ++j) {
    acc += coef_[m][j] * std::exp(kI * roots_[j] * r);
  }
  return acc / (4.0 * kPi * r);
}

cplx PolyKernel::laplacian_dr(double r, int m) const {
  check_order(params_, m);
  cplx acc = 0.0;
  for (int j = 0; j < params_.n; ++j) {
    acc += coef_[m][j] * (kI * roots_[j] - 1.0 / r) * std::exp(kI * roots_[j] * r);
  }
  return acc / (4.0 * kPi * r);
}

void PolyKernel::eval_all(double r, cplx* lap, cplx* dlap) const {
  const int n = params_.n;
  std::array<cplx, kMaxOrder> phi, dphi;
  const double inv = 1.0 / (4.0 * kPi * r);
  for (int j = 0; j < n; ++j) {
    // real and imaginary roots (n = 1, 2) skip the trivial factor
    const double re = roots_[j].real(), im = roots_[j].imag();
    const double decay = im == 0.0 ? inv : std::exp(-im * r) * inv;
    phi[j] = re == 0.0 ? cplx(decay, 0.0)
                       : cplx(std::cos(re * r) * decay, std::sin(re * r) * decay);
    dphi[j] = (kI * roots_[j] - 1.0 / r) * phi[j];
  }
  for (int m = 0; m < n; ++m) {
    cplx a = 0.0, b = 0.0;
    for (int j = 0; j < n; ++j) {
      a += coef_[m][j] * phi[j];
      b += coef_[m][j] * dphi[j];
    }
    lap[m] = a;
    dlap[m] = b;
  }
}

cplx PolyKernel::self_cell(double vol) const {
  // Phi = 1/(4 pi r) + (e^{i kappa r} - 1)/(4 pi r); the second part tends
  // to i kappa / (4 pi) at r = 0.
  const double r_eq = std::cbrt(3.0 * vol / (4.0 * kPi));
  cplx acc = 0.0;
  for (int j = 0; j < params_.n; ++j) {
    acc += coef_[0][j] * (0.5 * r_eq * r_eq + kI * roots_[j] * vol / (4.0 * kPi));
  }
  return acc;
}

PolyKernel PolyKernel::scaled(double s) const {
  PolyKernel out(*this);
  for (auto& row : out.coef_) {
    for (auto& c : row) c *= s;
  }
  return out;
}

}  // namespace polysrc::kernel
