#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "polysrc/fields.hpp"
#include "polysrc/gmres.hpp"
#include "polysrc/kernel.hpp"
#include "polysrc/quadrature.hpp"

namespace polysrc::probes {

using kernel::ModelParams;

enum class ProbeKind { plane_wave, cgo };

struct Frame {
  Vec3 d1;
  Vec3 d2;
};

/// d1, d2 orthonormal and orthogonal to gamma. The standard basis vector
/// least aligned with gamma (lowest index on ties) is orthogonalized against
/// gamma to give d1, and d2 = gamma x d1 / |gamma x d1|. gamma = 0 gives (e1, e2).
Frame choose_orthonormal_frame(const Vec3& gamma);

struct ProbeVectorPair {
  ProbeKind kind = ProbeKind::plane_wave;
  Vec3 gamma = Vec3::Zero();
  CVec3 xi1 = CVec3::Zero();
  CVec3 xi2 = CVec3::Zero();
  double t = 0.0;
  Vec3 d = Vec3::Zero();  // plane-wave direction (= d2)
  Vec3 d1 = Vec3::Zero();
  Vec3 d2 = Vec3::Zero();
};

/// xi = -gamma/2 +- sqrt(k^2 - |gamma|^2/4) d with d = d2 of the frame.
ProbeVectorPair plane_wave_pair(const Vec3& gamma, const ModelParams& params);

/// Largest t for which exp(2 R t) stays below 1e14.
double max_conditioned_t(double R);

/// xi = -gamma/2 +- (i t d1 + sqrt(t^2 - |gamma|^2/4) d2).
ProbeVectorPair cgo_pair(const Vec3& gamma, double t, const ModelParams& params,
                         double t_min = 0.0);

/// Periodic box for the remainder solve, centred at the origin.
struct CgoBox {
  double L = 0.0;  // side; 0 selects 4R + 2
  int M = 64;      // points per axis

  double side(double R) const { return L > 0.0 ? L : 4.0 * R + 2.0; }
};

struct CgoOptions {
  bool fixed_point = false;  // plain fixed-point iteration instead of GMRES
  double tolerance = 1e-10;
  int max_iterations = 500;
  int restart = 50;
};

/// Remainder in the rotated frame x' = Q x, where Q's rows are Im(xi)/t,
/// Re(xi)/t and their cross product, so xi' = Q xi = (i t, t, 0). Grid
/// coordinates are x'_a = -L/2 + i h. v carries the lattice shift: it is
/// exp(i pi x'_1 / L) times an L-periodic function.
struct CgoField {
  double t = 0.0;
  int n = 1;
  int M = 0;
  double L = 0.0;
  double h = 0.0;
  double lattice_shift = 0.0;  // pi / L along x'_1
  std::vector<cplx> v;
  std::vector<cplx> v_hat;  // DFT of the periodic part
  int iterations = 0;
  double residual = 0.0;
  double l2_ball = 0.0;  // ||v||_{L^2(B_{2R})}
  double R = 0.0;

  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(i) * M + j) * M + k;
  }
  double coord(int i) const { return -0.5 * L + i * h; }
};

struct CGORemainder {
  CVec3 xi = CVec3::Zero();
  Eigen::Matrix3d Q = Eigen::Matrix3d::Identity();
  std::shared_ptr<const CgoField> field;

  double t() const { return field->t; }
  int iterations() const { return field->iterations; }
  double residual() const { return field->residual; }
  double l2_ball() const { return field->l2_ball; }
};

/// Rotation taking xi to (i t, t, 0). Requires xi . xi = 0.
Eigen::Matrix3d cgo_rotation(const CVec3& xi);

/// Solves v = G_xi[chi (k^{2n} - q)(1 + v)] on the box, where G_xi divides
/// by (|eta|^2 + 2 xi.eta)^n on the shifted lattice and chi is a smooth
/// cutoff equal to 1 on B_{2R}.
std::shared_ptr<CgoField> solve_cgo_field(double t, const fields::ProfileSpec& q,
                                          const Eigen::Matrix3d& Q, const ModelParams& params,
                                          const CgoBox& box, const CgoOptions& opt = {});

CGORemainder cgo_remainder(const CVec3& xi, const fields::ProfileSpec& q,
                           const ModelParams& params, const CgoBox& box,
                           const CgoOptions& opt = {});

/// Spectral derivative fields of a remainder, in rotated coordinates:
/// W_m = (Delta + 2 i xi'.grad)^m (1 + v) and grad' W_m, m = 0..n-1.
struct CgoDerivatives {
  std::shared_ptr<const CgoField> field;
  std::vector<std::vector<cplx>> W;                  // [m]
  std::vector<std::array<std::vector<cplx>, 3>> dW;  // [m][axis]
};

CgoDerivatives cgo_derivatives(const std::shared_ptr<const CgoField>& field);

/// A remainder together with its derivative fields.
struct CgoProbe {
  CGORemainder remainder;
  std::shared_ptr<const CgoDerivatives> derivatives;
};

/// Remainder factory with reuse: for a potential that is radial about the
/// origin every remainder with the same t shares one rotated-frame field.
class CgoSolver {
 public:
  CgoSolver(const fields::ProfileSpec& q, const ModelParams& params, CgoBox box = {},
            CgoOptions opt = {});

  CgoProbe probe(const CVec3& xi);
  size_t solves() const { return solves_; }

 private:
  fields::ProfileSpec q_;
  ModelParams params_;
  CgoBox box_;
  CgoOptions opt_;
  std::mutex mutex_;
  std::map<double, std::shared_ptr<const CgoDerivatives>> cache_;
  size_t solves_ = 0;
};

struct ProbeBoundaryData {
  Eigen::MatrixXcd dirichlet;       // n x nodes, Delta^m U
  Eigen::MatrixXcd neumann;         // n x nodes, d/dnu Delta^m U
  Eigen::VectorXcd volume_samples;  // U at cell centres (empty unless a grid is given)
};

/// Boundary data of one probe U = e^{i xi.x}(1 + v); cgo == nullptr means a
/// plane wave (v = 0). CGO derivative fields are interpolated with 8-point
/// Lagrange stencils; every node needs a 4-point margin inside the box.
ProbeBoundaryData probe_data(const CVec3& xi, const CgoProbe* cgo, const SphereQuadrature& quad,
                             const fields::VolumeGrid* grid, const ModelParams& params);

/// Both probes of a pair. CGO pairs need both remainders.
std::pair<ProbeBoundaryData, ProbeBoundaryData> probe_boundary_data(
    const ProbeVectorPair& pair, const CgoProbe* p1, const CgoProbe* p2,
    const SphereQuadrature& quad, const fields::VolumeGrid* grid, const ModelParams& params);

/// Interpolates a rotated-frame grid field at the rotated point xr.
cplx interpolate(const CgoField& f, const std::vector<cplx>& data, const Vec3& xr);

}  // namespace polysrc::probes
