#include "polysrc/probes.hpp"

#include <cmath>

#include "polysrc/errors.hpp"
#include "polysrc/fft.hpp"

namespace polysrc::probes {

using Eigen::VectorXcd;

Frame choose_orthonormal_frame(const Vec3& gamma) {
  const double g = gamma.norm();
  if (g == 0.0) return {Vec3::UnitX(), Vec3::UnitY()};
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(gamma[a]) < std::abs(gamma[axis])) axis = a;
  }
  const Vec3 gh = gamma / g;
  const Vec3 e = Vec3::Unit(axis);
  const Vec3 d1 = (e - e.dot(gh) * gh).normalized();
  const Vec3 d2 = gamma.cross(d1).normalized();
  return {d1, d2};
}

ProbeVectorPair plane_wave_pair(const Vec3& gamma, const ModelParams& params) {
  params.validate();
  const double g = gamma.norm();
  if (!(g < 2.0 * params.k)) {
    throw FrequencyRangeError("plane-wave probes need |gamma| < 2k (|gamma| = " +
                              std::to_string(g) + ", k = " + std::to_string(params.k) + ")");
  }
  const Frame f = choose_orthonormal_frame(gamma);
  const double s = std::sqrt(params.k * params.k - 0.25 * g * g);
  ProbeVectorPair p;
  p.kind = ProbeKind::plane_wave;
  p.gamma = gamma;
  p.d = f.d2;
  p.d1 = f.d1;
  p.d2 = f.d2;
  const Vec3 x1 = -0.5 * gamma + s * f.d2;
  const Vec3 x2 = -0.5 * gamma - s * f.d2;
  p.xi1 = x1.cast<cplx>();
  p.xi2 = x2.cast<cplx>();
  return p;
}

double max_conditioned_t(double R) { return std::log(1e14) / (2.0 * R); }

ProbeVectorPair cgo_pair(const Vec3& gamma, double t, const ModelParams& params, double t_min) {
  params.validate();
  const double g = gamma.norm();
  if (!(t > 0.5 * g)) {
    throw AdmissibilityError("CGO probes need t > |gamma|/2 (t = " + std::to_string(t) +
                             ", |gamma| = " + std::to_string(g) + ")");
  }
  if (t < t_min) {
    throw AdmissibilityError("t = " + std::to_string(t) + " is below t_min = " +
                             std::to_string(t_min));
  }
  if (t > max_conditioned_t(params.R)) {
    throw AdmissibilityError("t = " + std::to_string(t) +
                             " fails the conditioning guard exp(2 R t) <= 1e14");
  }
  const Frame f = choose_orthonormal_frame(gamma);
  const double s = std::sqrt(t * t - 0.25 * g * g);
  ProbeVectorPair p;
  p.kind = ProbeKind::cgo;
  p.gamma = gamma;
  p.t = t;
  p.d1 = f.d1;
  p.d2 = f.d2;
  const CVec3 half = (-0.5 * gamma).cast<cplx>();
  const CVec3 w = kI * t * f.d1.cast<cplx>() + s * f.d2.cast<cplx>();
  p.xi1 = half + w;
  p.xi2 = half - w;
  return p;
}

Eigen::Matrix3d cgo_rotation(const CVec3& xi) {
  const Vec3 im = xi.imag();
  const Vec3 re = xi.real();
  const double t = im.norm();
  if (!(t > 0.0)) throw AdmissibilityError("CGO vector needs a non-zero imaginary part");
  const cplx xx = xi.transpose() * xi;
  if (std::abs(xx) > 1e-8 * t * t) {
    throw AdmissibilityError("CGO vector must satisfy xi . xi = 0");
  }
  const Vec3 a = im / t;
  const Vec3 b = (re - re.dot(a) * a).normalized();
  Eigen::Matrix3d Q;
  Q.row(0) = a.transpose();
  Q.row(1) = b.transpose();
  Q.row(2) = a.cross(b).transpose();
  return Q;
}

namespace {

double smooth_step(double z) { return z > 0.0 ? std::exp(-1.0 / z) : 0.0; }

// 1 for r <= r0, 0 for r >= r1, C-infinity in between.
double cutoff(double r, double r0, double r1) {
  const double s = std::clamp((r - r0) / (r1 - r0), 0.0, 1.0);
  const double a = smooth_step(1.0 - s), b = smooth_step(s);
  return a / (a + b);
}

struct Lattice {
  int M;
  double L;
  std::vector<double> eta[3];  // per-axis frequencies, shift on axis 0
};

Lattice make_lattice(int M, double L, double shift) {
  Lattice lat{M, L, {}};
  for (int a = 0; a < 3; ++a) {
    lat.eta[a].resize(M);
    for (int i = 0; i < M; ++i) {
      const int m = i < (M + 1) / 2 ? i : i - M;
      lat.eta[a][i] = 2.0 * kPi / L * m + (a == 0 ? shift : 0.0);
    }
  }
  return lat;
}

// s(eta) = |eta|^2 + 2 xi'.eta with xi' = (i t, t, 0).
inline cplx symbol(double e0, double e1, double e2, double t) {
  return cplx(e0 * e0 + e1 * e1 + e2 * e2 + 2.0 * t * e1, 2.0 * t * e0);
}

}  // namespace

std::shared_ptr<CgoField> solve_cgo_field(double t, const fields::ProfileSpec& q,
                                          const Eigen::Matrix3d& Q, const ModelParams& params,
                                          const CgoBox& box, const CgoOptions& opt) {
  params.validate();
  auto f = std::make_shared<CgoField>();
  const int M = box.M;
  if (M < 8 || M % 2 != 0) throw ConfigError("CGO box needs an even point count >= 8");
  f->t = t;
  f->n = params.n;
  f->M = M;
  f->R = params.R;
  f->L = box.side(params.R);
  f->h = f->L / M;
  f->lattice_shift = kPi / f->L;
  const double r_in = 2.0 * params.R;
  const double r_out = 0.5 * f->L - f->h;
  if (!(r_in < r_out)) {
    throw BoxCoverageError("CGO box too small: side must exceed 4R + 2h");
  }
  const size_t size = static_cast<size_t>(M) * M * M;
  const double k2n = std::pow(params.k, 2 * params.n);
  std::vector<cplx> weight(size), phase(size);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) {
      for (int l = 0; l < M; ++l) {
        const Vec3 xr(f->coord(i), f->coord(j), f->coord(l));
        const size_t id = f->index(i, j, l);
        const double r = xr.norm();
        const double chi = cutoff(r, r_in, r_out);
        const double qv = chi > 0.0 ? q(Q.transpose() * xr) : 0.0;
        weight[id] = chi * (k2n - qv);
        phase[id] = std::polar(1.0, f->lattice_shift * xr[0]);
      }
    }
  }
  const Lattice lat = make_lattice(M, f->L, f->lattice_shift);
  std::vector<cplx> inv_symbol(size);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      for (int l = 0; l < M; ++l)
        inv_symbol[f->index(i, j, l)] =
            1.0 / std::pow(symbol(lat.eta[0][i], lat.eta[1][j], lat.eta[2][l], t), params.n);

  Fft3 fft(M, M, M);
  std::vector<cplx> buf(size);
  // out = G_xi[in]
  auto apply_G = [&](const cplx* in, cplx* out) {
    for (size_t c = 0; c < size; ++c) buf[c] = in[c] / phase[c];
    fft.forward(buf.data());
    for (size_t c = 0; c < size; ++c) buf[c] *= inv_symbol[c];
    fft.inverse(buf.data());
    for (size_t c = 0; c < size; ++c) out[c] = buf[c] * phase[c];
  };

  const Eigen::Index n = static_cast<Eigen::Index>(size);
  VectorXcd rhs(n), v = VectorXcd::Zero(n), tmp(n);
  apply_G(weight.data(), rhs.data());
  if (opt.fixed_point) {
    VectorXcd next(n);
    double prev_diff = -1.0;
    int growing = 0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
      for (Eigen::Index c = 0; c < n; ++c) tmp[c] = weight[static_cast<size_t>(c)] * v[c];
      apply_G(tmp.data(), next.data());
      next += rhs;
      const double diff = (next - v).norm();
      const double scale = std::max(next.norm(), 1e-300);
      v.swap(next);
      f->iterations = it;
      f->residual = diff / scale;
      if (!std::isfinite(diff)) throw NonContractionError("CGO fixed point diverged", INFINITY);
      if (f->residual <= opt.tolerance) break;
      if (prev_diff > 0.0 && diff > prev_diff) {
        if (++growing >= 5) {
          throw NonContractionError("CGO fixed-point iteration is not contracting; t is below the "
                                    "admissible range",
                                    diff / prev_diff);
        }
      } else {
        growing = 0;
      }
      prev_diff = diff;
      if (it == opt.max_iterations) {
        throw SolverDivergenceError("CGO fixed point hit the iteration cap", it, f->residual);
      }
    }
  } else {
    auto apply = [&](const VectorXcd& x, VectorXcd& out) {
      for (Eigen::Index c = 0; c < n; ++c) tmp[c] = weight[static_cast<size_t>(c)] * x[c];
      out.resize(n);
      apply_G(tmp.data(), out.data());
      out = x - out;
    };
    GmresOptions g;
    g.restart = opt.restart;
    g.max_iterations = opt.max_iterations;
    g.tolerance = opt.tolerance;
    const GmresResult res = gmres(apply, rhs, v, g);
    f->iterations = res.iterations;
    f->residual = res.relative_residual;
  }

  f->v.assign(v.data(), v.data() + n);
  f->v_hat.resize(size);
  for (size_t c = 0; c < size; ++c) f->v_hat[c] = f->v[c] / phase[c];
  fft.forward(f->v_hat.data());
  double acc = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      for (int l = 0; l < M; ++l) {
        const Vec3 xr(f->coord(i), f->coord(j), f->coord(l));
        if (xr.norm() <= r_in) acc += std::norm(f->v[f->index(i, j, l)]);
      }
  f->l2_ball = std::sqrt(acc * f->h * f->h * f->h);
  return f;
}

CGORemainder cgo_remainder(const CVec3& xi, const fields::ProfileSpec& q,
                           const ModelParams& params, const CgoBox& box, const CgoOptions& opt) {
  CGORemainder r;
  r.xi = xi;
  r.Q = cgo_rotation(xi);
  r.field = solve_cgo_field(xi.imag().norm(), q, r.Q, params, box, opt);
  return r;
}

CgoDerivatives cgo_derivatives(const std::shared_ptr<const CgoField>& field) {
  const CgoField& f = *field;
  const int M = f.M;
  const size_t size = f.v.size();
  const Lattice lat = make_lattice(M, f.L, f.lattice_shift);
  std::vector<cplx> phase(size);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      for (int l = 0; l < M; ++l) phase[f.index(i, j, l)] = std::polar(1.0, f.lattice_shift * f.coord(i));
  Fft3 fft(M, M, M);
  CgoDerivatives d;
  d.field = field;
  d.W.resize(f.n);
  d.dW.resize(f.n);
  std::vector<cplx> spec(size);
  for (int m = 0; m < f.n; ++m) {
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j)
        for (int l = 0; l < M; ++l) {
          const size_t c = f.index(i, j, l);
          spec[c] = f.v_hat[c] * std::pow(-symbol(lat.eta[0][i], lat.eta[1][j], lat.eta[2][l], f.t), m);
        }
    std::vector<cplx> buf = spec;
    fft.inverse(buf.data());
    for (size_t c = 0; c < size; ++c) buf[c] = buf[c] * phase[c] + (m == 0 ? 1.0 : 0.0);
    d.W[m] = std::move(buf);
    for (int a = 0; a < 3; ++a) {
      std::vector<cplx> g(size);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
          for (int l = 0; l < M; ++l) {
            const size_t c = f.index(i, j, l);
            const int idx = a == 0 ? i : (a == 1 ? j : l);
            g[c] = kI * lat.eta[a][idx] * spec[c];
          }
      fft.inverse(g.data());
      for (size_t c = 0; c < size; ++c) g[c] *= phase[c];
      d.dW[m][a] = std::move(g);
    }
  }
  return d;
}

CgoSolver::CgoSolver(const fields::ProfileSpec& q, const ModelParams& params, CgoBox box,
                     CgoOptions opt)
    : q_(q), params_(params), box_(box), opt_(opt) {
  q_.validate();
  params_.validate();
}

CgoProbe CgoSolver::probe(const CVec3& xi) {
  CgoProbe p;
  p.remainder.xi = xi;
  p.remainder.Q = cgo_rotation(xi);
  const double t = xi.imag().norm();
  if (q_.is_radial()) {
    // |Im xi| of different pairs agrees only up to rounding
    const double key = std::round(t * 1e9) * 1e-9;
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      auto field = solve_cgo_field(t, q_, p.remainder.Q, params_, box_, opt_);
      ++solves_;
      auto der = std::make_shared<CgoDerivatives>(cgo_derivatives(field));
      it = cache_.emplace(key, der).first;
    }
    p.derivatives = it->second;
  } else {
    auto field = solve_cgo_field(t, q_, p.remainder.Q, params_, box_, opt_);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++solves_;
    }
    p.derivatives = std::make_shared<CgoDerivatives>(cgo_derivatives(field));
  }
  p.remainder.field = p.derivatives->field;
  return p;
}

namespace {

struct Stencil {
  int i0[3];
  double w[3][8];
};

Stencil make_stencil(const CgoField& f, const Vec3& xr) {
  Stencil s;
  for (int a = 0; a < 3; ++a) {
    const double u = (xr[a] + 0.5 * f.L) / f.h;
    const int base = static_cast<int>(std::floor(u)) - 3;
    if (base < 0 || base + 7 > f.M - 1) {
      throw BoxCoverageError("point outside the CGO box interpolation margin");
    }
    s.i0[a] = base;
    for (int j = 0; j < 8; ++j) {
      double w = 1.0;
      for (int l = 0; l < 8; ++l) {
        if (l != j) w *= (u - (base + l)) / double(j - l);
      }
      s.w[a][j] = w;
    }
  }
  return s;
}

cplx apply_stencil(const CgoField& f, const Stencil& s, const std::vector<cplx>& data) {
  cplx acc = 0.0;
  for (int a = 0; a < 8; ++a) {
    cplx acc_b = 0.0;
    for (int b = 0; b < 8; ++b) {
      const cplx* row = &data[f.index(s.i0[0] + a, s.i0[1] + b, s.i0[2])];
      cplx acc_c = 0.0;
      for (int c = 0; c < 8; ++c) acc_c += s.w[2][c] * row[c];
      acc_b += s.w[1][b] * acc_c;
    }
    acc += s.w[0][a] * acc_b;
  }
  return acc;
}

}  // namespace

cplx interpolate(const CgoField& f, const std::vector<cplx>& data, const Vec3& xr) {
  return apply_stencil(f, make_stencil(f, xr), data);
}

ProbeBoundaryData probe_data(const CVec3& xi, const CgoProbe* cgo, const SphereQuadrature& quad,
                             const fields::VolumeGrid* grid, const ModelParams& params) {
  const int n = params.n;
  const Eigen::Index P = static_cast<Eigen::Index>(quad.size());
  ProbeBoundaryData out;
  out.dirichlet.resize(n, P);
  out.neumann.resize(n, P);
  const cplx xx = xi.transpose() * xi;
  for (Eigen::Index p = 0; p < P; ++p) {
    const Vec3& x = quad.nodes[static_cast<size_t>(p)];
    const Vec3& nu = quad.normals[static_cast<size_t>(p)];
    const cplx e = std::exp(kI * cplx(xi.transpose() * x.cast<cplx>()));
    const cplx xinu = xi.transpose() * nu.cast<cplx>();
    if (!cgo) {
      cplx fac = 1.0;
      for (int m = 0; m < n; ++m) {
        out.dirichlet(m, p) = fac * e;
        out.neumann(m, p) = fac * kI * xinu * e;
        fac *= -xx;
      }
      continue;
    }
    const CgoField& f = *cgo->derivatives->field;
    const Eigen::Matrix3d& Q = cgo->remainder.Q;
    const Vec3 xr = Q * x;
    const Vec3 nr = Q * nu;
    const Stencil s = make_stencil(f, xr);
    for (int m = 0; m < n; ++m) {
      const cplx W = apply_stencil(f, s, cgo->derivatives->W[m]);
      cplx dn = 0.0;
      for (int a = 0; a < 3; ++a) dn += nr[a] * apply_stencil(f, s, cgo->derivatives->dW[m][a]);
      out.dirichlet(m, p) = e * W;
      out.neumann(m, p) = e * (kI * xinu * W + dn);
    }
  }
  if (grid) {
    out.volume_samples.resize(static_cast<Eigen::Index>(grid->size()));
    for (size_t c = 0; c < grid->size(); ++c) {
      const Vec3 x = grid->node(c);
      const cplx e = std::exp(kI * cplx(xi.transpose() * x.cast<cplx>()));
      cplx val = e;
      if (cgo) {
        val = e * interpolate(*cgo->derivatives->field, cgo->derivatives->W[0], cgo->remainder.Q * x);
      }
      out.volume_samples[static_cast<Eigen::Index>(c)] = val;
    }
  }
  return out;
}

std::pair<ProbeBoundaryData, ProbeBoundaryData> probe_boundary_data(
    const ProbeVectorPair& pair, const CgoProbe* p1, const CgoProbe* p2,
    const SphereQuadrature& quad, const fields::VolumeGrid* grid, const ModelParams& params) {
  if (pair.kind == ProbeKind::cgo && (!p1 || !p2)) {
    throw ConfigError("CGO probe pairs need both remainders");
  }
  if (pair.kind == ProbeKind::plane_wave) {
    return {probe_data(pair.xi1, nullptr, quad, grid, params),
            probe_data(pair.xi2, nullptr, quad, grid, params)};
  }
  return {probe_data(pair.xi1, p1, quad, grid, params), probe_data(pair.xi2, p2, quad, grid, params)};
}

}  // namespace polysrc::probes
