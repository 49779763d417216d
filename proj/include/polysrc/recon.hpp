#pragma once

#include <span>
#include <string>
#include <vector>

#include "polysrc/correlation.hpp"
#include "polysrc/direct.hpp"
#include "polysrc/fields.hpp"
#include "polysrc/probes.hpp"

namespace polysrc::recon {

/// Linear weights w with boundary_functional = w . trace (no conjugation):
/// D_m gets -(-1)^n w_p d_nu Delta^{n-1-m} U, N_m gets (-1)^n w_p Delta^{n-1-m} U.
Eigen::VectorXcd probe_weights(const probes::ProbeBoundaryData& U, const SphereQuadrature& quad,
                               int n);

/// (-1)^n sum_{j=1}^n int_{dB_R} (Delta^{n-j} U d_nu Delta^{j-1} u - Delta^{j-1} u d_nu Delta^{n-j} U).
cplx boundary_functional(const direct::BoundaryTrace& trace, const probes::ProbeBoundaryData& U,
                         const SphereQuadrature& quad, int n);

struct Estimate {
  cplx value = 0.0;
  double se = 0.0;
  uint64_t count = 0;
};

/// (2 pi)^{-3} times the mean of BF(U1) BF(U2) over the traces, with its
/// standard error.
Estimate fourier_estimate_at(std::span<const direct::BoundaryTrace> traces,
                             const probes::ProbeBoundaryData& U1,
                             const probes::ProbeBoundaryData& U2, const SphereQuadrature& quad,
                             int n);

/// E[BF(U1) BF(U2)] evaluated from the correlation tensor alone, given the
/// probe weight vectors of probe_weights().
cplx contract_correlations(const correlation::CorrelationTensor& tensor, const Eigen::VectorXcd& w1,
                           const Eigen::VectorXcd& w2);

/// Lattice dgamma * Z^3 restricted to |gamma| <= zeta, ordered by (x, y, z).
std::vector<Vec3> frequency_ball(double zeta, double dgamma);

struct FourierEstimate {
  std::vector<Vec3> frequencies;
  std::vector<cplx> values;
  std::vector<double> std_errors;
  double zeta = 0.0;
  double dgamma = 0.0;
};

/// Points of a per_axis^3 grid on [-1, 1]^3 inside the closed unit ball.
std::vector<Vec3> evaluation_points(int per_axis);

/// Sum_s e^{i gamma_s . x} c_s dgamma^3 for several coefficient sets at once
/// (columns of coeffs). Returns points x sets.
Eigen::MatrixXcd synthesize(const std::vector<Vec3>& frequencies, const Eigen::MatrixXcd& coeffs,
                            double dgamma, const std::vector<Vec3>& points);

struct ReconstructionResult {
  std::vector<Vec3> points;
  std::vector<double> sigma_rec;
  std::vector<double> imag_residual;
  std::vector<double> truth;
  double linf_error = 0.0;
  double l2_error = 0.0;
  double linf_relative = 0.0;
  double l2_relative = 0.0;
  double linf_se = 0.0;  // standard error of sigma_rec at the worst point (batch means)
  double max_imag = 0.0;
  double imag_se = 0.0;  // standard error of Im sigma_rec at its largest point
  size_t argmax = 0;
  double zeta = 0.0;
  double dgamma = 0.0;
};

/// sigma_rec = Re sum e^{i gamma x} sigma_hat dgamma^3. With `truth` the
/// errors are filled in; `batches` (frequencies x b estimates from disjoint
/// realization batches) gives the standard errors.
ReconstructionResult synthesize_sigma(const FourierEstimate& fe, const std::vector<Vec3>& points,
                                      const fields::ProfileSpec* truth = nullptr,
                                      const Eigen::MatrixXcd* batches = nullptr);

/// (2 pi)^{-3} sum_c sigma_c e^{-i gamma x_c} vol (midpoint quadrature).
cplx fourier_transform(const fields::StrengthField& sigma, const Vec3& gamma);

struct DecayReport {
  double s_nominal = 0.0;
  std::vector<double> radii;     // |gamma| samples
  std::vector<double> envelope;  // max over rays of |sigma_hat|
  double sup_weighted = 0.0;     // sup |sigma_hat| (1 + |gamma|)^s
  double head_weighted = 0.0;    // same, restricted to |gamma| <= gamma_max / 2
  double tail_weighted = 0.0;    // restricted to |gamma| > gamma_max / 2
  double fitted_exponent = 0.0;  // decay rate of the envelope peaks on the upper half
  bool violation = false;
  std::vector<double> zetas;
  std::vector<double> tails;  // int_{zeta < |gamma| < gamma_max} |sigma_hat|
  double c1 = 0.0;            // tails ~ c1 zeta^{3 - s_fit}
  double s_fit = 0.0;
};

/// Fourier decay of sigma by quadrature along 7 rays up to gamma_max.
DecayReport decay_diagnostic(const fields::StrengthField& sigma, double gamma_max = 20.0,
                             int samples = 161);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace polysrc::recon
