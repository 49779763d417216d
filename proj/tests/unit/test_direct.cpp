#include <doctest.h>

#include <cmath>
#include <random>

#include "polysrc/direct.hpp"
#include "polysrc/errors.hpp"
#include "polysrc/gmres.hpp"

using namespace polysrc;
using namespace polysrc::direct;
using Eigen::Index;
using Eigen::VectorXcd;

namespace {

VectorXcd random_vector(Index n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v[i] = cplx(nd(rng), nd(rng));
  return v;
}

}  // namespace

TEST_SUITE("direct") {
  TEST_CASE("sphere quadrature invariants") {
    const double R = 1.3;
    const auto q = build_sphere_quadrature(R, 10, 20);
    CHECK(q.size() == 200);
    CHECK(std::abs(q.weights.sum() - 4 * kPi * R * R) < 1e-10);
    for (size_t p = 0; p < q.size(); ++p) {
      CHECK(std::abs(q.nodes[p].norm() - R) < 1e-12);
      CHECK((q.normals[p] - q.nodes[p] / R).norm() < 1e-15);
      CHECK(q.weights[static_cast<Index>(p)] > 0.0);
    }
    // spherical harmonics up to degree 8 integrate to zero except Y_00
    double worst = 0.0;
    for (int a = 0; a <= 4; ++a) {
      for (int b = 0; b <= 4; ++b) {
        double acc = 0.0;
        for (size_t p = 0; p < q.size(); ++p) {
          const Vec3 x = q.nodes[p] / R;
          acc += q.weights[static_cast<Index>(p)] * std::pow(x[0], 2 * a + 1) * std::pow(x[2], b);
        }
        worst = std::max(worst, std::abs(acc));
      }
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("gmres solves a nonsymmetric complex system") {
    const Index n = 60;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n, n) * cplx(4.0, 1.0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) A(i, j) += 0.2 * cplx(nd(rng), nd(rng)) / std::sqrt(double(n));
    const VectorXcd b = random_vector(n, 6);
    VectorXcd x;
    GmresOptions opt;
    opt.restart = 10;
    opt.tolerance = 1e-12;
    const auto res = gmres([&](const VectorXcd& in, VectorXcd& out) { out = A * in; }, b, x, opt);
    CHECK(res.converged);
    CHECK((A * x - b).norm() <= 1e-11 * b.norm());
    opt.max_iterations = 2;
    opt.tolerance = 1e-15;
    VectorXcd y;
    CHECK_THROWS_AS(gmres([&](const VectorXcd& in, VectorXcd& out) { out = A * in; }, b, y, opt),
                    SolverDivergenceError);
  }

  TEST_CASE("FFT convolution matches direct summation and its adjoint") {
    const PolyKernel K({2, 3.0, 1.2});
    const auto grid = fields::make_grid(1.0, 7);
    VolumeOperator op(K, grid);
    const Index n = static_cast<Index>(grid.size());
    const VectorXcd z = random_vector(n, 1), y = random_vector(n, 2);
    VectorXcd a(n), b(n), c(n);
    op.convolve(z.data(), a.data());
    op.convolve_direct(z.data(), b.data());
    CHECK((a - b).norm() <= 1e-12 * b.norm());
    op.convolve_adjoint(y.data(), c.data());
    const cplx lhs = y.dot(a);  // <y, A z>
    const cplx rhs = c.dot(z);  // <A^H y, z>
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
    // off-diagonal entries are the point kernel
    CHECK(std::abs(op.entry(0, 5) - K.laplacian((grid.node(0) - grid.node(5)).norm(), 0)) < 1e-15);
  }

  TEST_CASE("boundary operator columns are closed-form kernels") {
    const kernel::ModelParams p{2, 2.0, 1.2};
    const PolyKernel K(p);
    const auto grid = fields::make_grid(1.0, 6);
    const auto quad = build_sphere_quadrature(p.R, 6, 8);
    std::vector<uint32_t> cells = {0, 40, 100, 215};
    BoundaryOperator op(K, grid, quad, cells, SourceModel{1});
    const size_t P = quad.size();
    for (Index col = 0; col < op.cols(); ++col) {
      const VectorXcd c = op.column(col);
      const Vec3 y = grid.node(cells[static_cast<size_t>(col)]);
      for (size_t q = 0; q < P; q += 7) {
        for (int m = 0; m < 2; ++m) {
          const cplx d = kernel::poly_green_laplacian(quad.nodes[q], y, p, m);
          const cplx nn = kernel::poly_green_normal_derivative(quad.nodes[q], y, p, m, quad.normals[q]);
          CHECK(std::abs(c[static_cast<Index>(m * P + q)] - d) <= 1e-13 * std::abs(d));
          CHECK(std::abs(c[static_cast<Index>((2 + m) * P + q)] - nn) <= 1e-13 * std::abs(nn));
        }
      }
    }
    // assembled and matrix-free application agree
    const VectorXcd z = random_vector(op.cols(), 3);
    const VectorXcd free = op.apply(z);
    op.assemble();
    REQUIRE(op.assembled());
    const VectorXcd dense = op.apply(z);
    CHECK((free - dense).norm() <= 1e-13 * dense.norm());
  }

  TEST_CASE("transfer matrix equals per-realization Lippmann-Schwinger solves") {
    const kernel::ModelParams p{2, 2.0, 1.2};
    const auto grid = fields::make_grid(1.0, 8);
    const auto sigma = fields::sample_strength(fields::smooth_bump(1.0, 0.8), grid);
    const auto q = fields::sample_potential(fields::smooth_bump(3.0, 0.7), grid);
    const auto quad = build_sphere_quadrature(p.R, 6, 8);
    DirectOptions opt;
    opt.gmres.tolerance = 1e-13;
    DirectSolver solver(p, sigma, q, quad, opt);
    Eigen::MatrixXd Tre, Tim;
    solver.transfer_matrix(Tre, Tim);
    const auto& cells = solver.source_cells();
    for (uint64_t r = 0; r < 3; ++r) {
      const auto w = fields::sample_white_noise(grid, 17, r);
      const BoundaryTrace tr = solver.solve(w);
      CHECK(tr.iterations > 0);
      Eigen::VectorXd s(static_cast<Index>(cells.size()));
      for (size_t i = 0; i < cells.size(); ++i) {
        s[static_cast<Index>(i)] = sigma.sqrt_values[cells[i]] * w.increments[cells[i]];
      }
      VectorXcd x(Tre.rows());
      x.real() = Tre * s;
      x.imag() = Tim * s;
      CHECK((x - tr.data).norm() <= 1e-10 * x.norm());
    }

    // u + K u = H f on the grid
    const auto w = fields::sample_white_noise(grid, 17, 0);
    const VectorXcd f = solver.source_charges(w);
    GmresResult info;
    const VectorXcd u = solver.volume_solution(f, &info);
    CHECK(info.converged);
    const VectorXcd Ku = apply_Kk(*solver.volume(), q, u);
    const Index n = static_cast<Index>(grid.size());
    VectorXcd Hf(n);
    solver.volume()->convolve(f.data(), Hf.data());
    CHECK((u + Ku - Hf).norm() <= 1e-11 * Hf.norm());
  }

  TEST_CASE("q = 0 solve is the boundary operator applied to the charges") {
    const kernel::ModelParams p{1, 3.0, 1.2};
    const auto grid = fields::make_grid(1.0, 8);
    const auto sigma = fields::sample_strength(fields::smooth_bump(1.0, 0.8), grid);
    const auto q = fields::sample_potential(fields::ProfileSpec{"zero"}, grid);
    const auto quad = build_sphere_quadrature(p.R, 6, 8);
    DirectSolver solver(p, sigma, q, quad);
    const auto w = fields::sample_white_noise(grid, 3, 9);
    const BoundaryTrace tr = solver.solve(w);
    CHECK(tr.n == 1);
    CHECK(tr.nodes == quad.size());
    CHECK(tr.iterations == 0);
    Eigen::MatrixXd Tre, Tim;
    solver.transfer_matrix(Tre, Tim);
    CHECK(Tre.cols() == static_cast<Index>(solver.source_cells().size()));
  }

  TEST_CASE("H_k at targets away from the grid") {
    const kernel::ModelParams p{2, 2.0, 1.2};
    const PolyKernel K(p);
    const auto grid = fields::make_grid(1.0, 4);
    const VectorXcd phi = random_vector(static_cast<Index>(grid.size()), 8);
    const std::vector<Vec3> targets = {{1.5, 0.0, 0.0}, {0.0, -2.0, 0.5}};
    const VectorXcd h = apply_Hk(K, grid, phi, targets);
    for (size_t t = 0; t < targets.size(); ++t) {
      cplx want = 0.0;
      for (size_t c = 0; c < grid.size(); ++c) {
        want += kernel::poly_green(targets[t], grid.node(c), p) * phi[static_cast<Index>(c)] *
                grid.cell_volume;
      }
      CHECK(std::abs(h[static_cast<Index>(t)] - want) <= 1e-13 * std::abs(want));
    }
    CHECK_THROWS_AS(apply_Hk(K, grid, phi, {grid.node(3)}, false), SingularPointError);
  }

  TEST_CASE("operator norm estimate") {
    LinearMap D;
    D.in_dim = D.out_dim = 5;
    const Eigen::VectorXd d = (Eigen::VectorXd(5) << 0.5, 3.0, -2.0, 1.0, 0.1).finished();
    D.apply = [&](const VectorXcd& x, VectorXcd& y) { y = d.cast<cplx>().cwiseProduct(x); };
    D.apply_adjoint = D.apply;
    const auto est = estimate_operator_norm(D, 1e-10, 2000);
    CHECK(est.converged);
    CHECK(est.value == doctest::Approx(3.0).epsilon(1e-6));

    // K_k adjoint consistency
    const PolyKernel K({2, 2.0, 1.2});
    const auto grid = fields::make_grid(1.0, 6);
    const auto q = fields::sample_potential(fields::smooth_bump(1.0, 0.8), grid);
    VolumeOperator op(K, grid);
    const LinearMap Km = volume_K_map(op, q);
    const VectorXcd x = random_vector(Km.in_dim, 4), y = random_vector(Km.out_dim, 5);
    VectorXcd Ax, Ahy;
    Km.apply(x, Ax);
    Km.apply_adjoint(y, Ahy);
    CHECK(std::abs(y.dot(Ax) - Ahy.dot(x)) <= 1e-12 * std::abs(y.dot(Ax)));
  }

  TEST_CASE("radiation residual decays outward") {
    const kernel::ModelParams p{2, 3.0, 1.2};
    const auto grid = fields::make_grid(1.0, 8);
    const auto sigma = fields::sample_strength(fields::smooth_bump(1.0, 0.8), grid);
    const auto q = fields::sample_potential(fields::ProfileSpec{"zero"}, grid);
    const auto quad = build_sphere_quadrature(p.R, 6, 8);
    DirectSolver solver(p, sigma, q, quad);
    const auto w = fields::sample_white_noise(grid, 1, 0);
    const VectorXcd f = solver.source_charges(w);
    const VectorXcd u = VectorXcd::Zero(f.size());
    const auto rep = radiation_residual(solver, f, u, {{1, 0, 0}, {0, 0, -1}, {0.6, 0.8, 0}});
    REQUIRE(rep.residual.size() == 4);
    for (size_t i = 1; i < rep.residual.size(); ++i) CHECK(rep.residual[i] < rep.residual[i - 1]);
  }
}
