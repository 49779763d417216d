#include "polysrc/recon.hpp"

#include <array>
#include <cmath>

#include "polysrc/errors.hpp"

namespace polysrc::recon {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {
constexpr double kTwoPiCubed = 8.0 * kPi * kPi * kPi;
}

VectorXcd probe_weights(const probes::ProbeBoundaryData& U, const SphereQuadrature& quad, int n) {
  const Index P = static_cast<Index>(quad.size());
  if (U.dirichlet.rows() != n || U.dirichlet.cols() != P || U.neumann.rows() != n ||
      U.neumann.cols() != P) {
    throw ShapeMismatchError("probe data and quadrature disagree");
  }
  const double sign = (n % 2 == 0) ? 1.0 : -1.0;
  VectorXcd w(2 * n * P);
  for (int m = 0; m < n; ++m) {
    const int o = n - 1 - m;
    for (Index p = 0; p < P; ++p) {
      w[m * P + p] = -sign * quad.weights[p] * U.neumann(o, p);
      w[(n + m) * P + p] = sign * quad.weights[p] * U.dirichlet(o, p);
    }
  }
  return w;
}

cplx boundary_functional(const direct::BoundaryTrace& trace, const probes::ProbeBoundaryData& U,
                         const SphereQuadrature& quad, int n) {
  if (trace.n != n || trace.nodes != quad.size()) {
    throw ShapeMismatchError("trace and quadrature disagree");
  }
  const VectorXcd w = probe_weights(U, quad, n);
  return (w.transpose() * trace.data)(0);
}

Estimate fourier_estimate_at(std::span<const direct::BoundaryTrace> traces,
                             const probes::ProbeBoundaryData& U1,
                             const probes::ProbeBoundaryData& U2, const SphereQuadrature& quad,
                             int n) {
  if (traces.empty()) throw ConfigError("fourier_estimate_at: no realizations");
  const VectorXcd w1 = probe_weights(U1, quad, n);
  const VectorXcd w2 = probe_weights(U2, quad, n);
  cplx sum = 0.0;
  double sum2 = 0.0;
  for (const auto& tr : traces) {
    if (tr.data.size() != w1.size()) throw ShapeMismatchError("trace length");
    const cplx b = (w1.transpose() * tr.data)(0) * (w2.transpose() * tr.data)(0);
    sum += b;
    sum2 += std::norm(b);
  }
  const double P = static_cast<double>(traces.size());
  Estimate e;
  e.count = traces.size();
  const cplx mean = sum / P;
  e.value = mean / kTwoPiCubed;
  if (traces.size() > 1) {
    const double var = std::max(0.0, sum2 / P - std::norm(mean)) * P / (P - 1.0);
    e.se = std::sqrt(var / P) / kTwoPiCubed;
  }
  return e;
}

cplx contract_correlations(const correlation::CorrelationTensor& tensor, const VectorXcd& w1,
                           const VectorXcd& w2) {
  const int n = tensor.n();
  const Index P = static_cast<Index>(tensor.nodes());
  if (w1.size() != 2 * n * P || w2.size() != 2 * n * P) {
    throw ShapeMismatchError("probe weights do not match the tensor shape");
  }
  auto alpha_of = [](bool a, bool b) { return a ? (b ? 4 : 2) : (b ? 3 : 1); };
  auto seg = [&](const VectorXcd& w, bool neu, int i) {
    return w.segment(((neu ? n : 0) + i) * P, P);
  };
  cplx acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < 2; ++b) {
        for (int j = 0; j < n; ++j) {
          if (i <= j) {
            const MatrixXcd S = tensor.mean(alpha_of(a, b), i, j);
            acc += (seg(w1, a, i).transpose() * S * seg(w2, b, j))(0);
          } else {
            const MatrixXcd S = tensor.mean(alpha_of(b, a), j, i);
            acc += (seg(w2, b, j).transpose() * S * seg(w1, a, i))(0);
          }
        }
      }
    }
  }
  return acc;
}

std::vector<Vec3> frequency_ball(double zeta, double dgamma) {
  if (!(zeta >= 0.0) || !(dgamma > 0.0)) throw ConfigError("need zeta >= 0 and dgamma > 0");
  const int m = static_cast<int>(std::floor(zeta / dgamma + 1e-9));
  std::vector<Vec3> out;
  const double lim = zeta * zeta * (1.0 + 1e-12) + 1e-300;
  for (int a = -m; a <= m; ++a)
    for (int b = -m; b <= m; ++b)
      for (int c = -m; c <= m; ++c) {
        const Vec3 g = dgamma * Vec3(a, b, c);
        if (g.squaredNorm() <= lim) out.push_back(g);
      }
  return out;
}

std::vector<Vec3> evaluation_points(int per_axis) {
  if (per_axis < 2) throw ConfigError("evaluation grid needs at least 2 points per axis");
  std::vector<Vec3> pts;
  const double h = 2.0 / (per_axis - 1);
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      for (int k = 0; k < per_axis; ++k) {
        const Vec3 x(-1.0 + i * h, -1.0 + j * h, -1.0 + k * h);
        if (x.squaredNorm() <= 1.0 + 1e-12) pts.push_back(x);
      }
  return pts;
}

MatrixXcd synthesize(const std::vector<Vec3>& frequencies, const MatrixXcd& coeffs, double dgamma,
                     const std::vector<Vec3>& points) {
  const Index F = static_cast<Index>(frequencies.size());
  if (coeffs.rows() != F) throw ShapeMismatchError("synthesize: coefficient rows");
  if (F == 0) throw ConfigError("synthesize: empty frequency grid");
  // Lattice frequencies factor as products of per-axis phases.
  bool lattice = dgamma > 0.0;
  int mmax = 0;
  std::vector<std::array<int, 3>> ints(frequencies.size());
  for (size_t f = 0; f < frequencies.size() && lattice; ++f) {
    for (int a = 0; a < 3; ++a) {
      const double u = frequencies[f][a] / dgamma;
      const double r = std::round(u);
      if (std::abs(u - r) > 1e-9) {
        lattice = false;
        break;
      }
      ints[f][a] = static_cast<int>(r);
      mmax = std::max(mmax, std::abs(ints[f][a]));
    }
  }
  const double scale = dgamma * dgamma * dgamma;
  const Index npts = static_cast<Index>(points.size());
  MatrixXcd out(npts, coeffs.cols());
  const Index block = 256;
  MatrixXcd E;
  std::vector<cplx> ph[3];
  for (Index p0 = 0; p0 < npts; p0 += block) {
    const Index nb = std::min(block, npts - p0);
    E.resize(nb, F);
    for (Index i = 0; i < nb; ++i) {
      const Vec3& x = points[static_cast<size_t>(p0 + i)];
      if (lattice) {
        for (int a = 0; a < 3; ++a) {
          ph[a].resize(2 * mmax + 1);
          for (int m = -mmax; m <= mmax; ++m) ph[a][m + mmax] = std::polar(1.0, m * dgamma * x[a]);
        }
        for (Index f = 0; f < F; ++f) {
          const auto& m = ints[static_cast<size_t>(f)];
          E(i, f) = ph[0][m[0] + mmax] * ph[1][m[1] + mmax] * ph[2][m[2] + mmax];
        }
      } else {
        for (Index f = 0; f < F; ++f) {
          E(i, f) = std::polar(1.0, frequencies[static_cast<size_t>(f)].dot(x));
        }
      }
    }
    out.middleRows(p0, nb).noalias() = E * coeffs;
  }
  return out * scale;
}

ReconstructionResult synthesize_sigma(const FourierEstimate& fe, const std::vector<Vec3>& points,
                                      const fields::ProfileSpec* truth,
                                      const MatrixXcd* batches) {
  const Index F = static_cast<Index>(fe.frequencies.size());
  if (F == 0) throw ConfigError("synthesize_sigma: empty frequency grid");
  if (static_cast<Index>(fe.values.size()) != F) throw ShapeMismatchError("values length");
  const Index nb = batches ? batches->cols() : 0;
  if (batches && batches->rows() != F) throw ShapeMismatchError("batch estimates rows");
  MatrixXcd coeffs(F, 1 + nb);
  for (Index f = 0; f < F; ++f) coeffs(f, 0) = fe.values[static_cast<size_t>(f)];
  if (nb > 0) coeffs.rightCols(nb) = *batches;
  const MatrixXcd s = synthesize(fe.frequencies, coeffs, fe.dgamma, points);

  ReconstructionResult r;
  r.points = points;
  r.zeta = fe.zeta;
  r.dgamma = fe.dgamma;
  const size_t np = points.size();
  r.sigma_rec.resize(np);
  r.imag_residual.resize(np);
  for (size_t i = 0; i < np; ++i) {
    r.sigma_rec[i] = s(static_cast<Index>(i), 0).real();
    r.imag_residual[i] = s(static_cast<Index>(i), 0).imag();
  }
  auto batch_se = [&](size_t i, bool imag) {
    if (nb < 2) return 0.0;
    double mean = 0.0, m2 = 0.0;
    for (Index b = 0; b < nb; ++b) {
      const cplx v = s(static_cast<Index>(i), 1 + b);
      mean += imag ? v.imag() : v.real();
    }
    mean /= nb;
    for (Index b = 0; b < nb; ++b) {
      const cplx v = s(static_cast<Index>(i), 1 + b);
      const double d = (imag ? v.imag() : v.real()) - mean;
      m2 += d * d;
    }
    return std::sqrt(m2 / (nb - 1) / nb);
  };
  size_t imax = 0;
  for (size_t i = 0; i < np; ++i) {
    if (std::abs(r.imag_residual[i]) > std::abs(r.imag_residual[imax])) imax = i;
  }
  r.max_imag = np ? std::abs(r.imag_residual[imax]) : 0.0;
  r.imag_se = np ? batch_se(imax, true) : 0.0;
  if (truth) {
    r.truth.resize(np);
    double tmax = 0.0, sq = 0.0, tsq = 0.0;
    for (size_t i = 0; i < np; ++i) {
      r.truth[i] = (*truth)(points[i]);
      const double e = std::abs(r.sigma_rec[i] - r.truth[i]);
      if (e > r.linf_error) {
        r.linf_error = e;
        r.argmax = i;
      }
      tmax = std::max(tmax, std::abs(r.truth[i]));
      sq += e * e;
      tsq += r.truth[i] * r.truth[i];
    }
    const double ball = 4.0 / 3.0 * kPi;
    r.l2_error = std::sqrt(sq / np * ball);
    r.linf_relative = tmax > 0.0 ? r.linf_error / tmax : r.linf_error;
    r.l2_relative = tsq > 0.0 ? std::sqrt(sq / tsq) : r.l2_error;
    r.linf_se = np ? batch_se(r.argmax, false) : 0.0;
  }
  return r;
}

cplx fourier_transform(const fields::StrengthField& sigma, const Vec3& gamma) {
  cplx acc = 0.0;
  for (size_t c = 0; c < sigma.values.size(); ++c) {
    if (sigma.values[c] == 0.0) continue;
    acc += sigma.values[c] * std::polar(1.0, -gamma.dot(sigma.grid.node(c)));
  }
  return acc * sigma.grid.cell_volume / kTwoPiCubed;
}

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw ConfigError("fit_line: degenerate abscissae");
  const double slope = (n * sxy - sx * sy) / den;
  return {slope, (sy - slope * sx) / n};
}

DecayReport decay_diagnostic(const fields::StrengthField& sigma, double gamma_max, int samples) {
  DecayReport rep;
  rep.s_nominal = sigma.profile.s_nominal;
  const std::vector<Vec3> rays = {
      Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(),
      Vec3(1, 1, 0).normalized(), Vec3(1, 0, 1).normalized(), Vec3(0, 1, 1).normalized(),
      Vec3(1, 1, 1).normalized()};
  std::vector<uint32_t> cells = sigma.support();
  rep.radii.resize(samples);
  rep.envelope.assign(samples, 0.0);
  for (int i = 0; i < samples; ++i) {
    const double g = gamma_max * i / (samples - 1);
    rep.radii[i] = g;
    for (const Vec3& d : rays) {
      cplx acc = 0.0;
      for (uint32_t c : cells) {
        acc += sigma.values[c] * std::polar(1.0, -g * d.dot(sigma.grid.node(c)));
      }
      rep.envelope[i] =
          std::max(rep.envelope[i], std::abs(acc) * sigma.grid.cell_volume / kTwoPiCubed);
    }
  }
  const double s = rep.s_nominal;
  for (int i = 0; i < samples; ++i) {
    const double w = rep.envelope[i] * std::pow(1.0 + rep.radii[i], s);
    rep.sup_weighted = std::max(rep.sup_weighted, w);
    if (rep.radii[i] <= 0.5 * gamma_max) {
      rep.head_weighted = std::max(rep.head_weighted, w);
    } else {
      rep.tail_weighted = std::max(rep.tail_weighted, w);
    }
  }
  // Peak-envelope decay rate on the upper half: maximum of |sigma_hat| in 8
  // equal bins, log-log fit against 1 + |gamma|.
  std::vector<double> lx, ly;
  const int bins = 8;
  for (int b = 0; b < bins; ++b) {
    const double lo = 0.5 * gamma_max * (1.0 + double(b) / bins);
    const double hi = 0.5 * gamma_max * (1.0 + double(b + 1) / bins);
    int best = -1;
    for (int i = 0; i < samples; ++i) {
      if (rep.radii[i] < lo || rep.radii[i] > hi) continue;
      if (best < 0 || rep.envelope[i] > rep.envelope[best]) best = i;
    }
    if (best >= 0 && rep.envelope[best] > 0.0) {
      lx.push_back(std::log(1.0 + rep.radii[best]));
      ly.push_back(std::log(rep.envelope[best]));
    }
  }
  if (lx.size() >= 2) rep.fitted_exponent = -fit_line(lx, ly).first;
  // Growth trend: the weighted envelope more than doubles from the lower to
  // the upper half of the range.
  rep.violation = rep.tail_weighted > 2.0 * rep.head_weighted;

  // Tail integrals 4 pi int_zeta^gamma_max g^2 env(g) dg (trapezoid).
  std::vector<double> lz, lt;
  for (double zeta = 4.0; zeta <= 0.6 * gamma_max + 1e-12; zeta += 2.0) {
    double acc = 0.0;
    for (int i = 0; i + 1 < samples; ++i) {
      const double a = rep.radii[i], b = rep.radii[i + 1];
      if (b <= zeta) continue;
      const double fa = a * a * rep.envelope[i], fb = b * b * rep.envelope[i + 1];
      acc += 0.5 * (fa + fb) * (b - std::max(a, zeta));
    }
    acc *= 4.0 * kPi;
    rep.zetas.push_back(zeta);
    rep.tails.push_back(acc);
    if (acc > 0.0) {
      lz.push_back(std::log(zeta));
      lt.push_back(std::log(acc));
    }
  }
  if (lz.size() >= 2) {
    const auto [slope, icpt] = fit_line(lz, lt);
    rep.s_fit = 3.0 - slope;
    rep.c1 = std::exp(icpt);
  }
  return rep;
}

}  // namespace polysrc::recon
