#include "polysrc/quadrature.hpp"

#include <cmath>

#include "polysrc/errors.hpp"

namespace polysrc {

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw ConfigError("Gauss-Legendre order must be >= 1");
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    gl.weights[i] = w;
    gl.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) gl.nodes[n / 2] = 0.0;
  return gl;
}

SphereQuadrature build_sphere_quadrature(double R, int n_theta, int n_phi) {
  if (!(R > 1.0)) throw ConfigError("sphere radius R must be > 1");
  if (n_theta < 2 || n_phi < 2) {
    throw ConfigError("sphere quadrature needs at least 2 nodes per axis");
  }
  const GaussLegendre gl = gauss_legendre(n_theta);
  SphereQuadrature q;
  q.R = R;
  q.n_theta = n_theta;
  q.n_phi = n_phi;
  q.nodes.reserve(static_cast<size_t>(n_theta) * n_phi);
  q.normals.reserve(q.nodes.capacity());
  q.weights.resize(static_cast<Eigen::Index>(n_theta) * n_phi);
  const double dphi = 2.0 * kPi / n_phi;
  Eigen::Index p = 0;
  for (int it = 0; it < n_theta; ++it) {
    const double ct = gl.nodes[it];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int ip = 0; ip < n_phi; ++ip) {
      const double phi = ip * dphi;
      const Vec3 nu(st * std::cos(phi), st * std::sin(phi), ct);
      q.normals.push_back(nu);
      q.nodes.push_back(R * nu);
      q.weights[p++] = R * R * gl.weights[it] * dphi;
    }
  }
  return q;
}

}  // namespace polysrc
