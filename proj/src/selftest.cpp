#include "polysrc/selftest.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "polysrc/correlation.hpp"
#include "polysrc/direct.hpp"
#include "polysrc/fields.hpp"
#include "polysrc/kernel.hpp"
#include "polysrc/probes.hpp"
#include "polysrc/quadrature.hpp"
#include "polysrc/recon.hpp"

namespace polysrc::selftest {

using Eigen::Index;
using Eigen::VectorXcd;
using kernel::ModelParams;
using kernel::PolyKernel;

namespace {

PolyKernel make_kernel(const ModelParams& p, const Options& opt) {
  PolyKernel k(p);
  return opt.inject_kernel_sign_flip ? k.scaled(-1.0) : k;
}

void add(std::vector<Check>& out, std::string name, double value, double tol,
         std::string detail = {}) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tol;
  c.passed = std::isfinite(value) && value <= tol;
  c.detail = std::move(detail);
  out.push_back(std::move(c));
}

// 4th-order central Laplacian of a radial function g(r) centred at x, source at 0.
template <class G>
cplx fd_laplacian(const G& g, const Vec3& x, double h) {
  cplx acc = 0.0;
  const double c[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
  for (int a = 0; a < 3; ++a) {
    for (int s = -2; s <= 2; ++s) {
      Vec3 y = x;
      y[a] += s * h;
      acc += c[s + 2] * g(y.norm());
    }
  }
  return acc / (12.0 * h * h);
}

void kernel_checks(std::vector<Check>& out, const Options& opt) {
  // kappa_j^{2n} = k^{2n}
  double root_err = 0.0;
  for (int n = 1; n <= 3; ++n) {
    const ModelParams p{n, 1.7, 1.2};
    const double k2n = std::pow(p.k, 2 * n);
    for (const cplx& kap : kernel::split_roots(p)) {
      root_err = std::max(root_err, std::abs(std::pow(kap, 2 * n) - k2n) / k2n);
    }
  }
  add(out, "kernel.root_power", root_err, 1e-13);

  // n = 1 reduces to the Helmholtz kernel
  {
    const ModelParams p{1, 4.0, 1.2};
    const PolyKernel K = make_kernel(p, opt);
    double err = 0.0;
    for (double r = 0.5; r <= 2.0; r += 0.25) {
      const cplx h = kernel::helmholtz_green(Vec3(r, 0, 0), Vec3::Zero(), p.k);
      err = std::max(err, std::abs(K.laplacian(r, 0) - h) / std::abs(h));
    }
    add(out, "kernel.n1_equals_helmholtz", err, 1e-14);
  }

  // closed form value
  {
    const ModelParams p{2, 1.0, 1.2};
    const PolyKernel K = make_kernel(p, opt);
    const cplx want = (std::exp(kI) - std::exp(-1.0)) / (8.0 * kPi);
    add(out, "kernel.known_value_n2", std::abs(K.laplacian(1.0, 0) - want) / std::abs(want), 1e-12);
  }

  // ((-Delta)^n - k^{2n}) G = 0 off the diagonal; the outer Laplacian is a
  // finite difference of the closed-form Delta^{n-1} G.
  {
    double worst = 0.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0), rr(0.5, 2.0);
    for (int n = 1; n <= 3; ++n) {
      for (double k : {1.0, 4.0}) {
        const ModelParams p{n, k, 1.2};
        const PolyKernel K = make_kernel(p, opt);
        for (int s = 0; s < 4; ++s) {
          Vec3 d(u(rng), u(rng), u(rng));
          const Vec3 x = d.normalized() * rr(rng);
          const auto g = [&](double r) { return K.laplacian(r, n - 1); };
          const cplx lapn = fd_laplacian(g, x, 1e-2);
          const double sign = (n % 2 == 0) ? 1.0 : -1.0;
          const double k2n = std::pow(k, 2 * n);
          const cplx G = K.laplacian(x.norm(), 0);
          worst = std::max(worst, std::abs(sign * lapn - k2n * G) / (k2n * std::abs(G)));
        }
      }
    }
    add(out, "kernel.pde_residual", worst, 1e-3);
  }

  // closed-form Laplacians and r-derivatives against finite differences
  {
    const ModelParams p{2, 1.0, 1.2};
    const PolyKernel K = make_kernel(p, opt);
    const Vec3 x(0.6, -0.3, 0.7);
    const auto g0 = [&](double r) { return K.laplacian(r, 0); };
    const cplx fd = fd_laplacian(g0, x, 1e-2);
    const cplx cf = K.laplacian(x.norm(), 1);
    add(out, "kernel.laplacian_closed_form", std::abs(fd - cf) / std::abs(cf), 1e-4);
    const double r = 1.3, h = 1e-5;
    double err = 0.0;
    for (int m = 0; m < 2; ++m) {
      const cplx fdr = (K.laplacian(r + h, m) - K.laplacian(r - h, m)) / (2.0 * h);
      err = std::max(err, std::abs(fdr - K.laplacian_dr(r, m)) / std::abs(fdr));
    }
    add(out, "kernel.normal_derivative", err, 1e-6);
  }
}

void quadrature_checks(std::vector<Check>& out) {
  const double R = 1.2;
  const SphereQuadrature q = build_sphere_quadrature(R, 12, 24);
  add(out, "quadrature.area", std::abs(q.weights.sum() - 4.0 * kPi * R * R) / (4 * kPi * R * R),
      1e-12);
  // x^2 z^2 over the sphere: 4 pi R^6 / 15; odd moments vanish
  double m22 = 0.0, odd = 0.0, radius = 0.0;
  for (size_t p = 0; p < q.size(); ++p) {
    const Vec3& x = q.nodes[p];
    m22 += q.weights[static_cast<Index>(p)] * x[0] * x[0] * x[2] * x[2];
    odd += q.weights[static_cast<Index>(p)] * x[0] * x[1] * x[1] * x[2];
    radius = std::max(radius, std::abs(x.norm() - R));
  }
  const double want = 4.0 * kPi * std::pow(R, 6) / 15.0;
  add(out, "quadrature.degree4_moment", std::abs(m22 - want) / want, 1e-12);
  add(out, "quadrature.odd_moment", std::abs(odd), 1e-12);
  add(out, "quadrature.node_radius", radius, 1e-12);
}

void probe_checks(std::vector<Check>& out) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double pw = 0.0, cg = 0.0;
  for (int s = 0; s < 200; ++s) {
    const ModelParams p{1 + s % 3, 2.0 + 2.0 * (u(rng) + 1.0), 1.2};
    Vec3 g(u(rng), u(rng), u(rng));
    g *= 0.95 * p.k;
    const auto a = probes::plane_wave_pair(g, p);
    const CVec3 gs = g.cast<cplx>();
    pw = std::max({pw, (a.xi1 + a.xi2 + gs).norm(),
                   std::abs(cplx(a.xi1.transpose() * a.xi1) - p.k * p.k) / (p.k * p.k),
                   std::abs(cplx(a.xi2.transpose() * a.xi2) - p.k * p.k) / (p.k * p.k)});
    const double t = 0.5 * g.norm() + 0.5 + 2.0 * (u(rng) + 1.0);
    const auto c = probes::cgo_pair(g, t, p);
    cg = std::max({cg, (c.xi1 + c.xi2 + gs).norm(), std::abs(cplx(c.xi1.transpose() * c.xi1)) / (t * t),
                   std::abs(cplx(c.xi2.transpose() * c.xi2)) / (t * t),
                   std::abs(c.xi1.imag().norm() - t) / t});
  }
  add(out, "probes.plane_wave_algebra", pw, 1e-12);
  add(out, "probes.cgo_algebra", cg, 1e-12);
}

void fft_check(std::vector<Check>& out, const Options& opt) {
  const ModelParams p{2, 2.0, 1.2};
  const auto grid = fields::make_grid(1.0, 6);
  const PolyKernel K = make_kernel(p, opt);
  direct::VolumeOperator op(K, grid);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<cplx> z(grid.size()), a(grid.size()), b(grid.size());
  for (auto& v : z) v = cplx(nd(rng), nd(rng));
  op.convolve(z.data(), a.data());
  op.convolve_direct(z.data(), b.data());
  double num = 0.0, den = 0.0;
  for (size_t c = 0; c < z.size(); ++c) {
    num = std::max(num, std::abs(a[c] - b[c]));
    den = std::max(den, std::abs(b[c]));
  }
  add(out, "direct.fft_matches_direct", num / den, 1e-10);
}

// Integration by parts: the boundary functional of one realization equals
// the volume pairing <f, U> up to discretization error.
void identity_check(std::vector<Check>& out, const Options& opt) {
  const auto grid = fields::make_grid(1.0, 16);
  const auto sigma = fields::sample_strength(fields::smooth_bump(1.0, 0.8), grid);
  const auto w = fields::sample_white_noise(grid, 42, 0);
  for (int n : {1, 2}) {
    const ModelParams p{n, 2.0, 1.2};
    const SphereQuadrature quad = build_sphere_quadrature(p.R, 20, 20);
    const PolyKernel K = make_kernel(p, opt);
    const auto cells = sigma.support();
    direct::BoundaryOperator op(K, grid, quad, cells);
    VectorXcd z(static_cast<Index>(cells.size()));
    for (size_t i = 0; i < cells.size(); ++i) {
      z[static_cast<Index>(i)] = sigma.sqrt_values[cells[i]] * w.increments[cells[i]];
    }
    direct::BoundaryTrace tr;
    tr.n = n;
    tr.nodes = quad.size();
    tr.data = op.apply(z);
    const auto pair = probes::plane_wave_pair(Vec3(1.0, 0.5, -0.25), p);
    const auto [U1, U2] = probes::probe_boundary_data(pair, nullptr, nullptr, quad, &grid, p);
    const cplx bf = recon::boundary_functional(tr, U1, quad, n);
    const cplx vp = fields::volume_pairing(
        sigma, w, std::span<const cplx>(U1.volume_samples.data(), U1.volume_samples.size()));
    std::ostringstream d;
    d << "bf = " << bf << ", vp = " << vp;
    add(out, "recon.boundary_functional_vs_volume_pairing_n" + std::to_string(n),
        std::abs(bf - vp) / std::abs(vp), 2e-2, d.str());
  }
}

void estimator_checks(std::vector<Check>& out) {
  // reproducible noise and its variance
  const auto grid = fields::make_grid(1.0, 48);
  const auto a = fields::sample_white_noise(grid, 5, 17);
  const auto b = fields::sample_white_noise(grid, 5, 17);
  add(out, "fields.noise_reproducible", a.increments == b.increments ? 0.0 : 1.0, 0.0);
  double s2 = 0.0;
  for (double v : a.increments) s2 += v * v;
  const double m = static_cast<double>(a.increments.size());
  const double var = s2 / m;
  const double se = grid.cell_volume * std::sqrt(2.0 / m);
  add(out, "fields.noise_variance_z", std::abs(var - grid.cell_volume) / se, 5.0);

  // correlation symmetry and contraction identity
  const int n = 2;
  const size_t nodes = 6;
  correlation::CorrelationTensor T(n, nodes);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<direct::BoundaryTrace> traces(40);
  for (auto& tr : traces) {
    tr.n = n;
    tr.nodes = nodes;
    tr.data.resize(2 * n * static_cast<Index>(nodes));
    for (Index i = 0; i < tr.data.size(); ++i) tr.data[i] = cplx(nd(rng), nd(rng));
    T.accumulate(tr);
  }
  const Eigen::MatrixXcd F = T.mean(1, 0, 0);
  add(out, "correlation.symmetry", (F - F.transpose()).cwiseAbs().maxCoeff(), 0.0);
  VectorXcd w1(2 * n * static_cast<Index>(nodes)), w2(w1.size());
  for (Index i = 0; i < w1.size(); ++i) {
    w1[i] = cplx(nd(rng), nd(rng));
    w2[i] = cplx(nd(rng), nd(rng));
  }
  cplx avg = 0.0;
  for (const auto& tr : traces) avg += (w1.transpose() * tr.data)(0) * (w2.transpose() * tr.data)(0);
  avg /= static_cast<double>(traces.size());
  const cplx con = recon::contract_correlations(T, w1, w2);
  add(out, "recon.contraction_equals_averaging", std::abs(con - avg) / std::abs(avg), 1e-10);
}

}  // namespace

std::vector<Check> run(const Options& opt) {
  std::vector<Check> out;
  kernel_checks(out, opt);
  quadrature_checks(out);
  probe_checks(out);
  fft_check(out, opt);
  identity_check(out, opt);
  estimator_checks(out);
  return out;
}

bool all_passed(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

nlohmann::json to_json(const std::vector<Check>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json j = {{"name", c.name},
                        {"value", c.value},
                        {"tolerance", c.tolerance},
                        {"passed", c.passed}};
    if (!c.detail.empty()) j["detail"] = c.detail;
    arr.push_back(j);
  }
  return {{"passed", all_passed(checks)}, {"checks", arr}};
}

}  // namespace polysrc::selftest
