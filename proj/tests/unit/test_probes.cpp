#include <doctest.h>

#include <cmath>
#include <random>

#include "polysrc/errors.hpp"
#include "polysrc/probes.hpp"

using namespace polysrc;
using namespace polysrc::probes;

namespace {

cplx dot(const CVec3& a, const CVec3& b) { return a.transpose() * b; }

}  // namespace

TEST_SUITE("probes") {
  TEST_CASE("orthonormal frame") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (int s = 0; s < 200; ++s) {
      const Vec3 g(nd(rng), nd(rng), nd(rng));
      const Frame f = choose_orthonormal_frame(g);
      CHECK(std::abs(f.d1.norm() - 1.0) < 1e-14);
      CHECK(std::abs(f.d2.norm() - 1.0) < 1e-14);
      CHECK(std::abs(f.d1.dot(f.d2)) < 1e-14);
      CHECK(std::abs(f.d1.dot(g)) < 1e-13 * g.norm());
      CHECK(std::abs(f.d2.dot(g)) < 1e-13 * g.norm());
    }
    const Frame z = choose_orthonormal_frame(Vec3::Zero());
    CHECK(z.d1 == Vec3::UnitX());
    CHECK(z.d2 == Vec3::UnitY());
  }

  TEST_CASE("plane-wave pair algebra") {
    const ModelParams p{2, 4.0, 1.2};
    const Vec3 g(1.0, -2.0, 0.5);
    const auto pr = plane_wave_pair(g, p);
    CHECK((pr.xi1 + pr.xi2 + g.cast<cplx>()).norm() < 1e-14);
    CHECK(std::abs(dot(pr.xi1, pr.xi1) - 16.0) < 1e-13);
    CHECK(std::abs(dot(pr.xi2, pr.xi2) - 16.0) < 1e-13);
    CHECK(pr.xi1.imag().norm() == 0.0);
    CHECK_THROWS_AS(plane_wave_pair(Vec3(8.0, 0, 0), p), FrequencyRangeError);
    CHECK_THROWS_AS(plane_wave_pair(Vec3(6.0, 6.0, 0), p), FrequencyRangeError);
    CHECK_NOTHROW(plane_wave_pair(Vec3(7.99, 0, 0), p));
  }

  TEST_CASE("CGO pair algebra and admissibility") {
    const ModelParams p{1, 2.0, 1.2};
    const Vec3 g(0.5, 1.0, -1.5);
    const double t = 3.0;
    const auto pr = cgo_pair(g, t, p);
    CHECK((pr.xi1 + pr.xi2 + g.cast<cplx>()).norm() < 1e-14);
    CHECK(std::abs(dot(pr.xi1, pr.xi1)) < 1e-13);
    CHECK(std::abs(dot(pr.xi2, pr.xi2)) < 1e-13);
    CHECK(std::abs(pr.xi1.imag().norm() - t) < 1e-14);
    CHECK(std::abs(pr.xi2.imag().norm() - t) < 1e-14);
    CHECK_THROWS_AS(cgo_pair(g, 0.5 * g.norm(), p), AdmissibilityError);
    CHECK_THROWS_AS(cgo_pair(g, 2.0, p, 2.5), AdmissibilityError);
    CHECK_THROWS_AS(cgo_pair(g, max_conditioned_t(p.R) + 1.0, p), AdmissibilityError);
    CHECK(std::exp(2.0 * p.R * max_conditioned_t(p.R)) == doctest::Approx(1e14));
  }

  TEST_CASE("rotation maps xi to (i t, t, 0)") {
    const ModelParams p{2, 1.0, 1.2};
    const auto pr = cgo_pair(Vec3(0.3, -0.7, 1.1), 2.5, p);
    for (const CVec3& xi : {pr.xi1, pr.xi2}) {
      const Eigen::Matrix3d Q = cgo_rotation(xi);
      CHECK((Q * Q.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-14);
      CHECK(Q.determinant() == doctest::Approx(1.0));
      const CVec3 r = Q.cast<cplx>() * xi;
      CHECK(std::abs(r[0] - cplx(0.0, 2.5)) < 1e-13);
      CHECK(std::abs(r[1] - cplx(2.5, 0.0)) < 1e-13);
      CHECK(std::abs(r[2]) < 1e-13);
    }
    CHECK_THROWS_AS(cgo_rotation(CVec3(1.0, 0.0, 0.0)), AdmissibilityError);
  }

  TEST_CASE("plane-wave boundary data") {
    const ModelParams p{3, 2.0, 1.2};
    const auto quad = build_sphere_quadrature(p.R, 4, 6);
    const auto pr = plane_wave_pair(Vec3(0.5, 0.2, -0.1), p);
    const auto d = probe_data(pr.xi1, nullptr, quad, nullptr, p);
    for (size_t q = 0; q < quad.size(); ++q) {
      const Vec3& x = quad.nodes[q];
      const cplx U = std::exp(kI * dot(pr.xi1, x.cast<cplx>()));
      const cplx dn = kI * dot(pr.xi1, quad.normals[q].cast<cplx>()) * U;
      for (int m = 0; m < 3; ++m) {
        const double f = std::pow(-4.0, m);
        CHECK(std::abs(d.dirichlet(m, static_cast<Eigen::Index>(q)) - f * U) < 1e-12 * std::abs(f));
        CHECK(std::abs(d.neumann(m, static_cast<Eigen::Index>(q)) - f * dn) < 1e-12 * std::abs(f) * 3);
      }
    }
  }

  TEST_CASE("Lagrange interpolation on the box grid") {
    CgoField f;
    f.M = 32;
    f.L = 6.0;
    f.h = f.L / f.M;
    const size_t size = 32 * 32 * 32;
    std::vector<cplx> data(size);
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j)
        for (int l = 0; l < 32; ++l) {
          const Vec3 x(f.coord(i), f.coord(j), f.coord(l));
          data[f.index(i, j, l)] = std::exp(cplx(-0.3 * x.squaredNorm(), 0.7 * x[1]));
        }
    const Vec3 x(0.37, -1.21, 0.05);
    const cplx want = std::exp(cplx(-0.3 * x.squaredNorm(), 0.7 * x[1]));
    CHECK(std::abs(interpolate(f, data, x) - want) < 1e-5);
    CHECK_THROWS_AS(interpolate(f, data, Vec3(2.95, 0.0, 0.0)), BoxCoverageError);
  }

  TEST_CASE("CGO remainder solves, shrinks with t and is shared for radial q") {
    const ModelParams p{1, 2.0, 1.2};
    const auto q = fields::smooth_bump(0.5, 0.8);
    CgoBox box{0.0, 32};
    const auto pr4 = cgo_pair(Vec3(1.0, 0.0, 0.0), 4.0, p);
    const auto pr8 = cgo_pair(Vec3(1.0, 0.0, 0.0), 8.0, p);
    const auto r4 = cgo_remainder(pr4.xi1, q, p, box);
    const auto r8 = cgo_remainder(pr8.xi1, q, p, box);
    CHECK(r4.residual() < 1e-9);
    CHECK(r8.l2_ball() < r4.l2_ball());

    CgoSolver solver(q, p, box);
    const auto a = cgo_pair(Vec3(0.5, 1.0, 0.0), 4.0, p);
    const auto b = cgo_pair(Vec3(-1.0, 0.2, 0.7), 4.0, p);
    const CgoProbe pa = solver.probe(a.xi1);
    const CgoProbe pb = solver.probe(b.xi2);
    CHECK(solver.solves() == 1);
    CHECK(pa.derivatives.get() == pb.derivatives.get());
    CHECK(std::abs(pa.remainder.l2_ball() - r4.l2_ball()) < 1e-12 * r4.l2_ball());

    // the CGO data tends to the plane exponential as t grows (roughly like 1/t)
    const auto quad = build_sphere_quadrature(p.R, 4, 6);
    const auto rel = [&](const probes::ProbeVectorPair& pr) {
      const CgoProbe pc = solver.probe(pr.xi1);
      const auto d = probe_data(pr.xi1, &pc, quad, nullptr, p);
      const auto e = probe_data(pr.xi1, nullptr, quad, nullptr, p);
      return (d.dirichlet - e.dirichlet).norm() / e.dirichlet.norm();
    };
    const double rel4 = rel(pr4), rel8 = rel(pr8);
    CHECK(rel8 < 0.7 * rel4);
    CHECK(rel8 < 0.3);
  }

  TEST_CASE("CGO box must cover B_2R") {
    const ModelParams p{1, 2.0, 1.2};
    CgoBox box{4.0, 32};
    const auto pr = cgo_pair(Vec3(1.0, 0.0, 0.0), 4.0, p);
    CHECK_THROWS_AS(cgo_remainder(pr.xi1, fields::smooth_bump(0.5, 0.8), p, box), BoxCoverageError);
  }
}
