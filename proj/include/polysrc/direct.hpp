#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "polysrc/fields.hpp"
#include "polysrc/gmres.hpp"
#include "polysrc/kernel.hpp"
#include "polysrc/quadrature.hpp"

namespace polysrc::direct {

using fields::NoiseRealization;
using fields::PotentialField;
using fields::StrengthField;
using fields::VolumeGrid;
using kernel::PolyKernel;

/// How a cell charge reaches the boundary: the kernel is averaged over a
/// tensor Gauss rule of `gauss_order`^3 points inside the cell. Order 1 is
/// the plain point-source (midpoint) model.
struct SourceModel {
  int gauss_order = 2;
};

/// Boundary data for one realization. Layout of `data`:
/// [D_0, ..., D_{n-1}, N_0, ..., N_{n-1}], each block one value per node,
/// with D_j = Delta^j u and N_j = d/dnu Delta^j u.
struct BoundaryTrace {
  int n = 0;
  size_t nodes = 0;
  Eigen::VectorXcd data;
  uint64_t realization = 0;
  int iterations = 0;
  double residual = 0.0;

  cplx dirichlet(int j, size_t p) const { return data[static_cast<Eigen::Index>(j * nodes + p)]; }
  cplx neumann(int j, size_t p) const {
    return data[static_cast<Eigen::Index>((n + j) * nodes + p)];
  }
};

/// Linear map from cell charges z_c (integral of the source over cell c) to
/// the trace vector. Either assembled once or applied matrix-free.
class BoundaryOperator {
 public:
  BoundaryOperator(const PolyKernel& kernel, const VolumeGrid& grid,
                   const SphereQuadrature& quad, std::vector<uint32_t> cells,
                   SourceModel model = {});

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(cells_.size()); }
  const std::vector<uint32_t>& cells() const { return cells_; }
  int order() const { return kernel_.params().n; }

  /// Builds the dense real/imaginary parts (rows x cols doubles each).
  void assemble(int threads = 1);
  bool assembled() const { return re_.size() > 0; }
  /// Drops the assembled matrices; apply() falls back to matrix-free.
  void release() {
    re_ = Eigen::MatrixXd();
    im_ = Eigen::MatrixXd();
  }
  const Eigen::MatrixXd& real() const { return re_; }
  const Eigen::MatrixXd& imag() const { return im_; }

  /// Trace vector for one charge vector (matrix-free if not assembled).
  Eigen::VectorXcd apply(const Eigen::VectorXcd& charges, int threads = 1) const;

  /// One column: trace produced by a unit charge in cells()[col].
  Eigen::VectorXcd column(Eigen::Index col) const;

 private:
  void row_block(size_t p, const cplx* charges, cplx* out, size_t stride) const;

  PolyKernel kernel_;
  VolumeGrid grid_;
  SphereQuadrature quad_;
  std::vector<uint32_t> cells_;
  SourceModel model_;
  std::vector<Vec3> offsets_;
  std::vector<double> gweights_;
  Eigen::Index rows_;
  Eigen::MatrixXd re_, im_;
};

/// Volume-to-volume convolution with the polyharmonic kernel at cell
/// centres: out_c = sum_{c'} G(x_c, x_c') z_c' for charges z, where the
/// diagonal term uses the self-cell average. FFT on a 2N zero-padded grid.
class VolumeOperator {
 public:
  VolumeOperator(const PolyKernel& kernel, const VolumeGrid& grid);
  ~VolumeOperator();
  VolumeOperator(const VolumeOperator&) = delete;
  VolumeOperator& operator=(const VolumeOperator&) = delete;

  const VolumeGrid& grid() const { return grid_; }

  /// Kernel entry between cells c (target) and c2 (source), per unit charge.
  cplx entry(size_t c, size_t c2) const;

  void convolve(const cplx* charges, cplx* out) const;
  /// Adjoint of convolve in the Euclidean inner product.
  void convolve_adjoint(const cplx* in, cplx* out) const;
  /// O(N^6) reference implementation.
  void convolve_direct(const cplx* charges, cplx* out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  PolyKernel kernel_;
  VolumeGrid grid_;
  cplx self_;
};

/// sum_c G(x, y_c) phi_c vol_c at arbitrary targets. A target at a cell
/// centre uses the self-cell average when `singular_correction` is set,
/// otherwise raises SingularPointError.
Eigen::VectorXcd apply_Hk(const PolyKernel& kernel, const VolumeGrid& grid,
                          const Eigen::VectorXcd& phi, const std::vector<Vec3>& targets,
                          bool singular_correction = true);

/// K u = sum_c G(x, y_c) q_c u_c vol_c at every cell centre.
Eigen::VectorXcd apply_Kk(const VolumeOperator& op, const PotentialField& q,
                          const Eigen::VectorXcd& u);

struct DirectOptions {
  SourceModel source;
  GmresOptions gmres;
  int threads = 1;
};

/// Per-realization direct solver. For q = 0 the trace is the boundary
/// operator applied to the noise charges; for q != 0 the Lippmann-Schwinger
/// system (I + K) u = H f is solved by GMRES first.
class DirectSolver {
 public:
  DirectSolver(const kernel::ModelParams& params, const StrengthField& sigma,
               const PotentialField& q, const SphereQuadrature& quad, DirectOptions opt = {});

  const PolyKernel& kernel() const { return kernel_; }
  const SphereQuadrature& quad() const { return quad_; }
  const StrengthField& sigma() const { return sigma_; }
  const PotentialField& potential() const { return q_; }
  const std::vector<uint32_t>& source_cells() const { return sigma_cells_; }
  BoundaryOperator& boundary() { return *boundary_; }
  const VolumeOperator* volume() const { return volume_.get(); }

  /// Noise charges sqrt(sigma) dW on every cell.
  Eigen::VectorXcd source_charges(const NoiseRealization& w) const;

  /// Volume field u at cell centres (GMRES when q != 0, plain convolution otherwise).
  Eigen::VectorXcd volume_solution(const Eigen::VectorXcd& f, GmresResult* info = nullptr) const;

  BoundaryTrace solve(const NoiseRealization& w) const;

  /// Dense map from sigma-support noise charges to traces, exact for the
  /// discrete model: T = A_s - A_q diag(q vol) (I + G_qq diag(q vol))^{-1} G_qs.
  /// Returned as real and imaginary parts.
  void transfer_matrix(Eigen::MatrixXd& re, Eigen::MatrixXd& im);

  /// Exterior field and radial derivative at arbitrary points (point charges).
  void exterior_field(const Eigen::VectorXcd& f, const Eigen::VectorXcd& u,
                      const std::vector<Vec3>& points, std::vector<cplx>& value,
                      std::vector<cplx>& radial_derivative) const;

 private:
  PolyKernel kernel_;
  StrengthField sigma_;
  PotentialField q_;
  SphereQuadrature quad_;
  DirectOptions opt_;
  std::vector<uint32_t> sigma_cells_, q_cells_, union_cells_;
  std::unique_ptr<BoundaryOperator> boundary_;
  std::unique_ptr<VolumeOperator> volume_;
};

struct RadiationReport {
  std::vector<double> radii;
  std::vector<double> residual;  // max over directions of |r (u_r - i k u)|
};

/// Evaluates |r(d_r u - i k u)| at radii {R, 2R, 4R, 8R} along the given
/// directions. f, u as in DirectSolver::exterior_field.
RadiationReport radiation_residual(const DirectSolver& solver, const Eigen::VectorXcd& f,
                                   const Eigen::VectorXcd& u, const std::vector<Vec3>& directions);

struct LinearMap {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)> apply;
  std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)> apply_adjoint;
};

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value by power iteration on A^H A, deterministic start.
NormEstimate estimate_operator_norm(const LinearMap& op, double tol = 1e-4,
                                    int max_iterations = 500);

/// K_k on L^2 of the volume grid: u -> G * (q u vol).
LinearMap volume_K_map(const VolumeOperator& op, const PotentialField& q);

/// H_k from L^2(volume) to L^2(sphere), Dirichlet trace j = 0, weighted by
/// the quadrature and cell volume so the Euclidean norm matches.
LinearMap boundary_H_map(const BoundaryOperator& op, const SphereQuadrature& quad,
                         const VolumeGrid& grid);

}  // namespace polysrc::direct
