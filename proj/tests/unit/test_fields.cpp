#include <doctest.h>

#include <cmath>
#include <numeric>

#include "polysrc/errors.hpp"
#include "polysrc/fields.hpp"

using namespace polysrc;
using namespace polysrc::fields;

namespace {

// int_0^rho 4 pi r^2 sigma(r) dr by composite Simpson.
double radial_integral(const ProfileSpec& p, int intervals = 20000) {
  const double rho = p.radius;
  const double h = rho / intervals;
  double acc = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double r = i * h;
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * 4.0 * kPi * r * r * p(Vec3(r, 0, 0));
  }
  return acc * h / 3.0;
}

}  // namespace

TEST_SUITE("fields") {
  TEST_CASE("make_grid examples") {
    auto g = make_grid(1.0, 2);
    CHECK(g.size() == 8);
    CHECK(g.cell_volume == doctest::Approx(1.0));
    g = make_grid(1.0, 4);
    CHECK(g.size() == 64);
    CHECK(g.cell_volume == doctest::Approx(0.125));
    CHECK_THROWS_AS(make_grid(1.0, 0), ConfigError);
    CHECK_THROWS_AS(make_grid(0.5, 8), ConfigError);
    // nodes strictly inside the box
    g = make_grid(1.5, 7);
    for (size_t c = 0; c < g.size(); ++c) CHECK(g.node(c).cwiseAbs().maxCoeff() < 1.5);
  }

  TEST_CASE("smooth bump values and support") {
    const ProfileSpec p = smooth_bump(1.0, 0.8);
    CHECK(p(Vec3::Zero()) == doctest::Approx(1.0));
    CHECK(p(Vec3(0.8, 0, 0)) == 0.0);
    CHECK(p(Vec3(0.0, 0.95, 0)) == 0.0);
    ProfileSpec bad = smooth_bump(1.0, 1.2);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(sample_strength(bad, make_grid(1.0, 8)), ConfigError);
  }

  TEST_CASE("strength integral against radial quadrature") {
    const ProfileSpec p = smooth_bump(1.0, 0.8);
    const auto s = sample_strength(p, make_grid(1.0, 64));
    const double want = radial_integral(p);
    CHECK(std::abs(s.integral() - want) <= 1e-3 * want);
  }

  TEST_CASE("support invariant") {
    for (const char* kind : {"smooth_bump", "gaussian_bump", "two_bumps", "indicator"}) {
      ProfileSpec p;
      p.kind = kind;
      p.radius = std::string(kind) == "two_bumps" ? 0.4 : 0.9;
      p.offset = 0.5;
      const auto grid = make_grid(1.2, 24);
      const auto s = sample_strength(p, grid);
      for (size_t c = 0; c < grid.size(); ++c) {
        CHECK(s.values[c] >= 0.0);
        if (grid.node(c).norm() >= 1.0) CHECK(s.values[c] == 0.0);
        CHECK(s.sqrt_values[c] == doctest::Approx(std::sqrt(s.values[c])));
      }
    }
  }

  TEST_CASE("white noise is reproducible and keyed") {
    const auto grid = make_grid(1.0, 16);
    const auto a = sample_white_noise(grid, 11, 3);
    const auto b = sample_white_noise(grid, 11, 3);
    CHECK(a.increments == b.increments);
    const auto c = sample_white_noise(grid, 11, 4);
    CHECK(a.increments != c.increments);
    const auto d = sample_white_noise(grid, 12, 3);
    CHECK(a.increments != d.increments);
    // subset sampling agrees with full sampling
    std::vector<uint32_t> cells = {0, 5, 17, 4095};
    std::vector<double> out(cells.size());
    sample_white_noise(grid, 11, 3, cells, out.data());
    for (size_t i = 0; i < cells.size(); ++i) CHECK(out[i] == a.increments[cells[i]]);
  }

  TEST_CASE("noise variance within five standard errors") {
    const auto grid = make_grid(1.0, 48);  // 110592 cells
    const auto w = sample_white_noise(grid, 2024, 0);
    const double m = static_cast<double>(w.increments.size());
    double mean = 0.0, s2 = 0.0;
    for (double v : w.increments) {
      mean += v;
      s2 += v * v;
    }
    mean /= m;
    const double var = s2 / m;
    // chi-square: Var(sample variance) = 2 vol^2 / m
    CHECK(std::abs(var - grid.cell_volume) <= 5.0 * grid.cell_volume * std::sqrt(2.0 / m));
    CHECK(std::abs(mean) <= 5.0 * std::sqrt(grid.cell_volume / m));
  }

  TEST_CASE("box total is N(0, total volume) and realizations are uncorrelated") {
    const auto grid = make_grid(1.0, 8);
    const int R = 1000;
    std::vector<double> z(R);
    for (int r = 0; r < R; ++r) {
      const auto w = sample_white_noise(grid, 99, static_cast<uint64_t>(r));
      z[r] = std::accumulate(w.increments.begin(), w.increments.end(), 0.0) / std::sqrt(8.0);
    }
    double mean = 0.0, var = 0.0, lag = 0.0;
    for (double v : z) mean += v;
    mean /= R;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= (R - 1);
    for (int r = 1; r < R; ++r) lag += z[r] * z[r - 1];
    lag /= (R - 1);
    CHECK(std::abs(mean) <= 5.0 / std::sqrt(R));
    CHECK(std::abs(var - 1.0) <= 5.0 * std::sqrt(2.0 / R));
    CHECK(std::abs(lag) <= 5.0 / std::sqrt(R));
  }

  TEST_CASE("volume pairing") {
    const auto grid = make_grid(1.0, 8);
    ProfileSpec zero;
    zero.kind = "zero";
    const auto s0 = sample_strength(zero, grid);
    const auto w = sample_white_noise(grid, 1, 0);
    std::vector<cplx> ones(grid.size(), 1.0);
    CHECK(volume_pairing(s0, w, ones) == cplx(0.0));
    std::vector<cplx> wrong(3, 1.0);
    CHECK_THROWS_AS(volume_pairing(s0, w, wrong), ShapeMismatchError);
  }

  TEST_CASE("discrete Ito isometry") {
    const auto grid = make_grid(1.0, 8);
    const auto s = sample_strength(smooth_bump(1.0, 0.8), grid);
    const int R = 10000;
    std::vector<cplx> U(grid.size()), V(grid.size());
    for (size_t c = 0; c < grid.size(); ++c) {
      const Vec3 x = grid.node(c);
      U[c] = std::polar(1.0, 1.3 * x[0] - 0.4 * x[2]);
      V[c] = 1.0 + x[1];
    }
    // E[<f,1>^2] = sum sigma vol and E[<f,U><f,V>] = sum sigma U V vol
    double m1 = 0.0, m1sq = 0.0;
    cplx m2 = 0.0;
    double m2sq = 0.0;
    std::vector<cplx> ones(grid.size(), 1.0);
    for (int r = 0; r < R; ++r) {
      const auto w = sample_white_noise(grid, 5, static_cast<uint64_t>(r));
      const double a = volume_pairing(s, w, ones).real();
      m1 += a * a;
      m1sq += a * a * a * a;
      const cplx b = volume_pairing(s, w, U) * volume_pairing(s, w, V);
      m2 += b;
      m2sq += std::norm(b);
    }
    m1 /= R;
    m2 /= static_cast<double>(R);
    const double se1 = std::sqrt((m1sq / R - m1 * m1) / R);
    const double se2 = std::sqrt((m2sq / R - std::norm(m2)) / R);
    cplx want2 = 0.0;
    for (size_t c = 0; c < grid.size(); ++c) want2 += s.values[c] * U[c] * V[c] * grid.cell_volume;
    CHECK(std::abs(m1 - s.integral()) <= 5.0 * se1);
    CHECK(std::abs(m2 - want2) <= 5.0 * se2);
  }

  TEST_CASE("potential field") {
    const auto grid = make_grid(1.0, 12);
    ProfileSpec p = smooth_bump(0.5, 0.8);
    const auto q = sample_potential(p, grid);
    CHECK(q.sup_norm > 0.0);
    CHECK(q.sup_norm <= 0.5);
    for (size_t c = 0; c < grid.size(); ++c) {
      if (grid.node(c).norm() >= 1.0) CHECK(q.values[c] == cplx(0.0));
    }
    ProfileSpec z;
    z.kind = "zero";
    CHECK(sample_potential(z, grid).is_zero());
  }
}
