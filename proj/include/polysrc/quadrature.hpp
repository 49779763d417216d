#pragma once

#include <vector>

#include "polysrc/types.hpp"

namespace polysrc {

struct GaussLegendre {
  std::vector<double> nodes;    // ascending, in (-1, 1)
  std::vector<double> weights;  // sum to 2
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n.
GaussLegendre gauss_legendre(int n);

/// Product rule on the sphere of radius R: Gauss-Legendre in cos(theta),
/// uniform in phi. Node p = it * n_phi + ip.
struct SphereQuadrature {
  double R = 0.0;
  int n_theta = 0;
  int n_phi = 0;
  std::vector<Vec3> nodes;
  std::vector<Vec3> normals;
  Eigen::VectorXd weights;

  size_t size() const { return nodes.size(); }
};

SphereQuadrature build_sphere_quadrature(double R, int n_theta, int n_phi);

}  // namespace polysrc
