#include "polysrc/direct.hpp"

#include <algorithm>
#include <cmath>

#include "polysrc/errors.hpp"
#include "polysrc/fft.hpp"
#include "polysrc/parallel.hpp"
#include "polysrc/rng.hpp"

namespace polysrc::direct {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

// ---------------------------------------------------------------- boundary

BoundaryOperator::BoundaryOperator(const PolyKernel& kernel, const VolumeGrid& grid,
                                   const SphereQuadrature& quad, std::vector<uint32_t> cells,
                                   SourceModel model)
    : kernel_(kernel), grid_(grid), quad_(quad), cells_(std::move(cells)), model_(model) {
  if (model_.gauss_order < 1 || model_.gauss_order > 8) {
    throw ConfigError("grid.source_order must be in [1, 8]");
  }
  rows_ = static_cast<Index>(2 * kernel_.params().n * quad_.size());
  const GaussLegendre gl = gauss_legendre(model_.gauss_order);
  const int g = model_.gauss_order;
  const double half = 0.5 * grid_.h;
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      for (int c = 0; c < g; ++c) {
        offsets_.emplace_back(half * gl.nodes[a], half * gl.nodes[b], half * gl.nodes[c]);
        gweights_.push_back(gl.weights[a] * gl.weights[b] * gl.weights[c] / 8.0);
      }
    }
  }
  for (uint32_t c : cells_) {
    if (c >= grid_.size()) throw ShapeMismatchError("boundary operator: cell index out of range");
  }
}

namespace {

// Cell-averaged D_m and N_m at node x with normal nu for the cell centred at y.
inline void cell_entries(const PolyKernel& kernel, const Vec3& x, const Vec3& nu, const Vec3& y,
                         const std::vector<Vec3>& offsets, const std::vector<double>& weights,
                         cplx* D, cplx* Nv) {
  const int n = kernel.params().n;
  cplx lap[PolyKernel::kMaxOrder], dlap[PolyKernel::kMaxOrder];
  for (int m = 0; m < n; ++m) D[m] = Nv[m] = 0.0;
  for (size_t g = 0; g < offsets.size(); ++g) {
    const Vec3 d = x - (y + offsets[g]);
    const double r = d.norm();
    if (r < kernel::kSingularEps) {
      throw SingularPointError("boundary node coincides with a source point");
    }
    kernel.eval_all(r, lap, dlap);
    const double proj = nu.dot(d) / r;
    for (int m = 0; m < n; ++m) {
      D[m] += weights[g] * lap[m];
      Nv[m] += weights[g] * proj * dlap[m];
    }
  }
}

}  // namespace

void BoundaryOperator::assemble(int threads) {
  if (assembled()) return;
  const int n = kernel_.params().n;
  const size_t P = quad_.size();
  re_.resize(rows_, cols());
  im_.resize(rows_, cols());
  parallel_for(0, cells_.size(), threads, [&](size_t col) {
    const Vec3 y = grid_.node(cells_[col]);
    cplx D[PolyKernel::kMaxOrder], Nv[PolyKernel::kMaxOrder];
    double* re = re_.col(static_cast<Index>(col)).data();
    double* im = im_.col(static_cast<Index>(col)).data();
    for (size_t p = 0; p < P; ++p) {
      cell_entries(kernel_, quad_.nodes[p], quad_.normals[p], y, offsets_, gweights_, D, Nv);
      for (int m = 0; m < n; ++m) {
        re[m * P + p] = D[m].real();
        im[m * P + p] = D[m].imag();
        re[(n + m) * P + p] = Nv[m].real();
        im[(n + m) * P + p] = Nv[m].imag();
      }
    }
  });
}

VectorXcd BoundaryOperator::column(Index col) const {
  const int n = kernel_.params().n;
  const size_t P = quad_.size();
  VectorXcd out(rows_);
  if (assembled()) {
    for (Index i = 0; i < rows_; ++i) out[i] = cplx(re_(i, col), im_(i, col));
    return out;
  }
  const Vec3 y = grid_.node(cells_[static_cast<size_t>(col)]);
  cplx D[PolyKernel::kMaxOrder], Nv[PolyKernel::kMaxOrder];
  for (size_t p = 0; p < P; ++p) {
    cell_entries(kernel_, quad_.nodes[p], quad_.normals[p], y, offsets_, gweights_, D, Nv);
    for (int m = 0; m < n; ++m) {
      out[static_cast<Index>(m * P + p)] = D[m];
      out[static_cast<Index>((n + m) * P + p)] = Nv[m];
    }
  }
  return out;
}

void BoundaryOperator::row_block(size_t p, const cplx* charges, cplx* out, size_t stride) const {
  const int n = kernel_.params().n;
  cplx D[PolyKernel::kMaxOrder], Nv[PolyKernel::kMaxOrder];
  cplx accD[PolyKernel::kMaxOrder] = {}, accN[PolyKernel::kMaxOrder] = {};
  for (size_t col = 0; col < cells_.size(); ++col) {
    if (charges[col] == 0.0) continue;
    cell_entries(kernel_, quad_.nodes[p], quad_.normals[p], grid_.node(cells_[col]), offsets_,
                 gweights_, D, Nv);
    for (int m = 0; m < n; ++m) {
      accD[m] += D[m] * charges[col];
      accN[m] += Nv[m] * charges[col];
    }
  }
  for (int m = 0; m < n; ++m) {
    out[m * stride] = accD[m];
    out[(n + m) * stride] = accN[m];
  }
}

VectorXcd BoundaryOperator::apply(const VectorXcd& charges, int threads) const {
  if (charges.size() != cols()) throw ShapeMismatchError("boundary operator: charge length");
  VectorXcd out(rows_);
  if (assembled()) {
    const VectorXcd re_part = re_ * charges;
    const VectorXcd im_part = im_ * charges;
    out = re_part + kI * im_part;
    return out;
  }
  const size_t P = quad_.size();
  parallel_for(0, P, threads, [&](size_t p) { row_block(p, charges.data(), out.data() + p, P); });
  return out;
}

// ------------------------------------------------------------------ volume

struct VolumeOperator::Impl {
  explicit Impl(int M) : fft(M, M, M) {}
  Fft3 fft;
  std::vector<cplx> kernel_hat;
};

VolumeOperator::VolumeOperator(const PolyKernel& kernel, const VolumeGrid& grid)
    : kernel_(kernel), grid_(grid) {
  const int N = grid.N;
  const int M = 2 * N;
  impl_ = std::make_unique<Impl>(M);
  self_ = kernel_.self_cell(grid.cell_volume) / grid.cell_volume;
  auto& tab = impl_->kernel_hat;
  tab.assign(static_cast<size_t>(M) * M * M, 0.0);
  for (int a = -(N - 1); a <= N - 1; ++a) {
    for (int b = -(N - 1); b <= N - 1; ++b) {
      for (int c = -(N - 1); c <= N - 1; ++c) {
        const size_t idx =
            (static_cast<size_t>((a + M) % M) * M + (b + M) % M) * M + (c + M) % M;
        if (a == 0 && b == 0 && c == 0) {
          tab[idx] = self_;
        } else {
          const double r = grid.h * std::sqrt(double(a * a + b * b + c * c));
          tab[idx] = kernel_.laplacian(r, 0);
        }
      }
    }
  }
  impl_->fft.forward(tab.data());
}

VolumeOperator::~VolumeOperator() = default;

cplx VolumeOperator::entry(size_t c, size_t c2) const {
  if (c == c2) return self_;
  return kernel_.laplacian((grid_.node(c) - grid_.node(c2)).norm(), 0);
}

void VolumeOperator::convolve(const cplx* charges, cplx* out) const {
  const int N = grid_.N;
  const int M = 2 * N;
  std::vector<cplx> buf(static_cast<size_t>(M) * M * M, 0.0);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        buf[(static_cast<size_t>(i) * M + j) * M + k] = charges[grid_.index(i, j, k)];
  impl_->fft.forward(buf.data());
  for (size_t t = 0; t < buf.size(); ++t) buf[t] *= impl_->kernel_hat[t];
  impl_->fft.inverse(buf.data());
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        out[grid_.index(i, j, k)] = buf[(static_cast<size_t>(i) * M + j) * M + k];
}

void VolumeOperator::convolve_adjoint(const cplx* in, cplx* out) const {
  // G is symmetric, so G^H v = conj(G conj(v)).
  const size_t n = grid_.size();
  std::vector<cplx> tmp(n);
  for (size_t c = 0; c < n; ++c) tmp[c] = std::conj(in[c]);
  convolve(tmp.data(), out);
  for (size_t c = 0; c < n; ++c) out[c] = std::conj(out[c]);
}

void VolumeOperator::convolve_direct(const cplx* charges, cplx* out) const {
  const size_t n = grid_.size();
  for (size_t c = 0; c < n; ++c) {
    cplx acc = 0.0;
    for (size_t c2 = 0; c2 < n; ++c2) {
      if (charges[c2] != 0.0) acc += entry(c, c2) * charges[c2];
    }
    out[c] = acc;
  }
}

VectorXcd apply_Hk(const PolyKernel& kernel, const VolumeGrid& grid, const VectorXcd& phi,
                   const std::vector<Vec3>& targets, bool singular_correction) {
  if (static_cast<size_t>(phi.size()) != grid.size()) {
    throw ShapeMismatchError("apply_Hk: density length differs from grid size");
  }
  const double vol = grid.cell_volume;
  const cplx self = kernel.self_cell(vol);
  VectorXcd out(static_cast<Index>(targets.size()));
  for (size_t t = 0; t < targets.size(); ++t) {
    cplx acc = 0.0;
    for (size_t c = 0; c < grid.size(); ++c) {
      if (phi[static_cast<Index>(c)] == 0.0) continue;
      const double r = (targets[t] - grid.node(c)).norm();
      if (r < kernel::kSingularEps) {
        if (!singular_correction) {
          throw SingularPointError("apply_Hk: target coincides with a cell centre");
        }
        acc += self * phi[static_cast<Index>(c)];
      } else {
        acc += kernel.laplacian(r, 0) * phi[static_cast<Index>(c)] * vol;
      }
    }
    out[static_cast<Index>(t)] = acc;
  }
  return out;
}

VectorXcd apply_Kk(const VolumeOperator& op, const PotentialField& q, const VectorXcd& u) {
  const size_t n = op.grid().size();
  if (q.values.size() != n || static_cast<size_t>(u.size()) != n) {
    throw ShapeMismatchError("apply_Kk: u, q and grid sizes differ");
  }
  VectorXcd z(static_cast<Index>(n)), out(static_cast<Index>(n));
  for (size_t c = 0; c < n; ++c) {
    z[static_cast<Index>(c)] = q.values[c] * u[static_cast<Index>(c)] * op.grid().cell_volume;
  }
  op.convolve(z.data(), out.data());
  return out;
}

// ------------------------------------------------------------------ solver

DirectSolver::DirectSolver(const kernel::ModelParams& params, const StrengthField& sigma,
                           const PotentialField& q, const SphereQuadrature& quad,
                           DirectOptions opt)
    : kernel_(params), sigma_(sigma), q_(q), quad_(quad), opt_(opt) {
  if (sigma_.values.size() != sigma_.grid.size()) {
    throw ShapeMismatchError("strength field does not match its grid");
  }
  if (q_.values.empty()) {
    q_.grid = sigma_.grid;
    q_.values.assign(sigma_.grid.size(), 0.0);
  }
  if (q_.values.size() != sigma_.values.size() || q_.grid.N != sigma_.grid.N) {
    throw ShapeMismatchError("strength and potential live on different grids");
  }
  sigma_cells_ = sigma_.support();
  q_cells_ = q_.support();
  std::set_union(sigma_cells_.begin(), sigma_cells_.end(), q_cells_.begin(), q_cells_.end(),
                 std::back_inserter(union_cells_));
  boundary_ = std::make_unique<BoundaryOperator>(kernel_, sigma_.grid, quad_, union_cells_,
                                                 opt_.source);
  if (!q_.is_zero()) volume_ = std::make_unique<VolumeOperator>(kernel_, sigma_.grid);
}

VectorXcd DirectSolver::source_charges(const NoiseRealization& w) const {
  if (w.increments.size() != sigma_.grid.size()) {
    throw ShapeMismatchError("noise realization does not match the grid");
  }
  VectorXcd f(static_cast<Index>(w.increments.size()));
  for (size_t c = 0; c < w.increments.size(); ++c) {
    f[static_cast<Index>(c)] = sigma_.sqrt_values[c] * w.increments[c];
  }
  return f;
}

VectorXcd DirectSolver::volume_solution(const VectorXcd& f, GmresResult* info) const {
  const size_t n = sigma_.grid.size();
  VectorXcd rhs(static_cast<Index>(n));
  if (!volume_) {
    VolumeOperator op(kernel_, sigma_.grid);
    op.convolve(f.data(), rhs.data());
    if (info) *info = GmresResult{0, 0.0, true};
    return rhs;
  }
  volume_->convolve(f.data(), rhs.data());
  const double vol = sigma_.grid.cell_volume;
  VectorXcd z(static_cast<Index>(n));
  auto apply = [&](const VectorXcd& x, VectorXcd& out) {
    for (size_t c = 0; c < n; ++c) {
      z[static_cast<Index>(c)] = q_.values[c] * vol * x[static_cast<Index>(c)];
    }
    out.resize(static_cast<Index>(n));
    volume_->convolve(z.data(), out.data());
    out += x;
  };
  VectorXcd u = VectorXcd::Zero(static_cast<Index>(n));
  const GmresResult res = gmres(apply, rhs, u, opt_.gmres);
  if (info) *info = res;
  return u;
}

BoundaryTrace DirectSolver::solve(const NoiseRealization& w) const {
  const VectorXcd f = source_charges(w);
  BoundaryTrace tr;
  tr.n = kernel_.params().n;
  tr.nodes = quad_.size();
  tr.realization = w.realization;
  VectorXcd z(static_cast<Index>(union_cells_.size()));
  if (q_.is_zero()) {
    for (size_t i = 0; i < union_cells_.size(); ++i) {
      z[static_cast<Index>(i)] = f[union_cells_[i]];
    }
  } else {
    GmresResult info;
    const VectorXcd u = volume_solution(f, &info);
    tr.iterations = info.iterations;
    tr.residual = info.relative_residual;
    const double vol = sigma_.grid.cell_volume;
    for (size_t i = 0; i < union_cells_.size(); ++i) {
      const uint32_t c = union_cells_[i];
      z[static_cast<Index>(i)] = f[c] - q_.values[c] * vol * u[c];
    }
  }
  tr.data = boundary_->apply(z, opt_.threads);
  return tr;
}

void DirectSolver::transfer_matrix(MatrixXd& re, MatrixXd& im) {
  const Index rows = boundary_->rows();
  const Index ns = static_cast<Index>(sigma_cells_.size());
  // position of each union cell
  auto pos = [&](uint32_t c) {
    return static_cast<Index>(std::lower_bound(union_cells_.begin(), union_cells_.end(), c) -
                              union_cells_.begin());
  };
  boundary_->assemble(opt_.threads);
  const MatrixXd& Are = boundary_->real();
  const MatrixXd& Aim = boundary_->imag();
  re.resize(rows, ns);
  im.resize(rows, ns);
  for (Index j = 0; j < ns; ++j) {
    const Index pj = pos(sigma_cells_[static_cast<size_t>(j)]);
    re.col(j) = Are.col(pj);
    im.col(j) = Aim.col(pj);
  }
  if (q_.is_zero()) return;

  const Index nq = static_cast<Index>(q_cells_.size());
  if (nq > 8000) {
    throw ConfigError("potential support too large for the dense transfer matrix (" +
                      std::to_string(nq) + " cells); use a coarser grid");
  }
  const double vol = sigma_.grid.cell_volume;
  Eigen::VectorXcd qv(nq);
  for (Index i = 0; i < nq; ++i) qv[i] = q_.values[q_cells_[static_cast<size_t>(i)]] * vol;
  MatrixXcd Mq(nq, nq);
  parallel_for(0, static_cast<size_t>(nq), opt_.threads, [&](size_t jj) {
    const Index j = static_cast<Index>(jj);
    for (Index i = 0; i < nq; ++i) {
      Mq(i, j) = volume_->entry(q_cells_[static_cast<size_t>(i)], q_cells_[jj]) * qv[j];
    }
    Mq(j, j) += 1.0;
  });
  MatrixXcd Gqs(nq, ns);
  parallel_for(0, static_cast<size_t>(ns), opt_.threads, [&](size_t jj) {
    for (Index i = 0; i < nq; ++i) {
      Gqs(i, static_cast<Index>(jj)) =
          volume_->entry(q_cells_[static_cast<size_t>(i)], sigma_cells_[jj]);
    }
  });
  const MatrixXcd Y = Mq.partialPivLu().solve(Gqs);  // u on supp q per unit charge
  MatrixXcd Aq(rows, nq);
  for (Index i = 0; i < nq; ++i) {
    const Index pi = pos(q_cells_[static_cast<size_t>(i)]);
    Aq.col(i) = (Are.col(pi).cast<cplx>() + kI * Aim.col(pi).cast<cplx>()) * qv[i];
  }
  const MatrixXcd corr = Aq * Y;
  re -= corr.real();
  im -= corr.imag();
}

void DirectSolver::exterior_field(const VectorXcd& f, const VectorXcd& u,
                                  const std::vector<Vec3>& points, std::vector<cplx>& value,
                                  std::vector<cplx>& radial_derivative) const {
  const double vol = sigma_.grid.cell_volume;
  value.assign(points.size(), 0.0);
  radial_derivative.assign(points.size(), 0.0);
  for (size_t t = 0; t < points.size(); ++t) {
    const Vec3& x = points[t];
    const Vec3 xhat = x / x.norm();
    cplx v = 0.0, dv = 0.0;
    for (uint32_t c : union_cells_) {
      cplx z = f[c];
      if (!q_.is_zero() && u.size() > 0) z -= q_.values[c] * vol * u[c];
      if (z == 0.0) continue;
      const Vec3 d = x - sigma_.grid.node(c);
      const double r = d.norm();
      v += kernel_.laplacian(r, 0) * z;
      dv += kernel_.laplacian_dr(r, 0) * (xhat.dot(d) / r) * z;
    }
    value[t] = v;
    radial_derivative[t] = dv;
  }
}

RadiationReport radiation_residual(const DirectSolver& solver, const VectorXcd& f,
                                   const VectorXcd& u, const std::vector<Vec3>& directions) {
  RadiationReport rep;
  const double R = solver.quad().R;
  const double k = solver.kernel().params().k;
  for (double s : {1.0, 2.0, 4.0, 8.0}) {
    const double r = s * R;
    std::vector<Vec3> pts;
    for (const Vec3& d : directions) pts.push_back(r * d.normalized());
    std::vector<cplx> val, dval;
    solver.exterior_field(f, u, pts, val, dval);
    double worst = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      worst = std::max(worst, std::abs(r * (dval[i] - kI * k * val[i])));
    }
    rep.radii.push_back(r);
    rep.residual.push_back(worst);
  }
  return rep;
}

// -------------------------------------------------------------- operator norms

NormEstimate estimate_operator_norm(const LinearMap& op, double tol, int max_iterations) {
  NormEstimate est;
  if (op.in_dim == 0 || op.out_dim == 0) {
    est.converged = true;
    return est;
  }
  VectorXcd v(op.in_dim), Av(op.out_dim), w(op.in_dim);
  for (Index i = 0; i < op.in_dim; ++i) {
    const auto b = rng::noise_block(0x5eed, 0, static_cast<uint64_t>(i));
    v[i] = cplx(rng::uniform53(b[0], b[1]) - 0.5, rng::uniform53(b[2], b[3]) - 0.5);
  }
  v.normalize();
  double prev = -1.0;
  for (int it = 1; it <= max_iterations; ++it) {
    op.apply(v, Av);
    const double sigma = Av.norm();
    est.iterations = it;
    est.value = sigma;
    if (sigma == 0.0) {
      est.converged = true;
      return est;
    }
    op.apply_adjoint(Av, w);
    const double wn = w.norm();
    if (wn == 0.0) {
      est.converged = true;
      return est;
    }
    v = w / wn;
    if (prev >= 0.0 && std::abs(sigma - prev) <= tol * sigma) {
      est.converged = true;
      return est;
    }
    prev = sigma;
  }
  throw NumericalError("power iteration for the operator norm did not converge in " +
                       std::to_string(max_iterations) + " iterations");
}

LinearMap volume_K_map(const VolumeOperator& op, const PotentialField& q) {
  const size_t n = op.grid().size();
  if (q.values.size() != n) throw ShapeMismatchError("volume_K_map: potential size");
  const double vol = op.grid().cell_volume;
  LinearMap m;
  m.in_dim = m.out_dim = static_cast<Index>(n);
  m.apply = [&op, &q, vol, n](const VectorXcd& in, VectorXcd& out) {
    VectorXcd z(static_cast<Index>(n));
    for (size_t c = 0; c < n; ++c) z[static_cast<Index>(c)] = q.values[c] * vol * in[static_cast<Index>(c)];
    out.resize(static_cast<Index>(n));
    op.convolve(z.data(), out.data());
  };
  m.apply_adjoint = [&op, &q, vol, n](const VectorXcd& in, VectorXcd& out) {
    out.resize(static_cast<Index>(n));
    op.convolve_adjoint(in.data(), out.data());
    for (size_t c = 0; c < n; ++c) out[static_cast<Index>(c)] *= std::conj(q.values[c]) * vol;
  };
  return m;
}

LinearMap boundary_H_map(const BoundaryOperator& op, const SphereQuadrature& quad,
                         const VolumeGrid& grid) {
  if (!op.assembled()) throw ConfigError("boundary_H_map needs an assembled operator");
  const Index P = static_cast<Index>(quad.size());
  const double sv = std::sqrt(grid.cell_volume);
  const Eigen::VectorXd sw = quad.weights.cwiseSqrt();
  LinearMap m;
  m.in_dim = op.cols();
  m.out_dim = P;
  m.apply = [&op, P, sv, sw](const VectorXcd& in, VectorXcd& out) {
    const auto re = op.real().topRows(P);
    const auto im = op.imag().topRows(P);
    out = (re * in + kI * (im * in)) * sv;
    out.array() *= sw.array();
  };
  m.apply_adjoint = [&op, P, sv, sw](const VectorXcd& in, VectorXcd& out) {
    const auto re = op.real().topRows(P);
    const auto im = op.imag().topRows(P);
    VectorXcd y = in.array() * sw.array().cast<cplx>();
    out = (re.transpose() * y - kI * (im.transpose() * y)) * sv;
  };
  return m;
}

}  // namespace polysrc::direct
