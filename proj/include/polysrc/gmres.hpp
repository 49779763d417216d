#pragma once

#include <cmath>
#include <vector>

#include "polysrc/errors.hpp"
#include "polysrc/types.hpp"

namespace polysrc {

struct GmresOptions {
  int restart = 50;
  int max_iterations = 500;
  double tolerance = 1e-8;  // on ||b - A x|| / ||b||
  bool throw_on_failure = true;
};

struct GmresResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// apply(in, out) computes out = A in. x holds the initial guess on entry.
template <class Apply>
GmresResult gmres(Apply&& apply, const Eigen::VectorXcd& b, Eigen::VectorXcd& x,
                  const GmresOptions& opt = {}) {
  using Eigen::VectorXcd;
  const Eigen::Index n = b.size();
  GmresResult res;
  const double bnorm = b.norm();
  if (x.size() != n) x = VectorXcd::Zero(n);
  if (bnorm == 0.0) {
    x.setZero();
    res.converged = true;
    return res;
  }
  const int m = opt.restart;
  std::vector<VectorXcd> V(m + 1, VectorXcd(n));
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
  std::vector<cplx> cs(m), sn(m), g(m + 1);
  VectorXcd w(n), r(n);

  apply(x, r);
  r = b - r;
  double beta = r.norm();
  res.relative_residual = beta / bnorm;
  while (res.relative_residual > opt.tolerance && res.iterations < opt.max_iterations) {
    V[0] = r / beta;
    std::fill(g.begin(), g.end(), cplx(0.0));
    g[0] = beta;
    int j = 0;
    for (; j < m && res.iterations < opt.max_iterations; ++j) {
      apply(V[j], w);
      ++res.iterations;
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V[i].dot(w);  // conjugates V[i]
        w -= H(i, j) * V[i];
      }
      const double hn = w.norm();
      H(j + 1, j) = hn;
      if (hn > 0.0) V[j + 1] = w / hn;
      for (int i = 0; i < j; ++i) {
        const cplx t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double a = std::abs(H(j, j));
      const double denom = std::hypot(a, hn);
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else if (a == 0.0) {
        cs[j] = 0.0;
        sn[j] = 1.0;
      } else {
        cs[j] = a / denom;
        sn[j] = hn / denom * std::conj(H(j, j) / a);
      }
      H(j, j) = std::conj(cs[j]) * H(j, j) + std::conj(sn[j]) * hn;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = std::conj(cs[j]) * g[j];
      res.relative_residual = std::abs(g[j + 1]) / bnorm;
      if (res.relative_residual <= opt.tolerance || hn == 0.0) {
        ++j;
        break;
      }
    }
    // back substitution on the j x j triangle
    std::vector<cplx> y(j);
    for (int i = j - 1; i >= 0; --i) {
      cplx s = g[i];
      for (int l = i + 1; l < j; ++l) s -= H(i, l) * y[l];
      y[i] = s / H(i, i);
    }
    for (int i = 0; i < j; ++i) x += y[i] * V[i];
    apply(x, r);
    r = b - r;
    beta = r.norm();
    res.relative_residual = beta / bnorm;
    if (!std::isfinite(beta)) break;
    if (beta == 0.0) break;
  }
  res.converged = res.relative_residual <= opt.tolerance;
  if (!res.converged && opt.throw_on_failure) {
    throw SolverDivergenceError("GMRES did not reach the requested tolerance", res.iterations,
                                res.relative_residual);
  }
  return res;
}

}  // namespace polysrc
