#include "polysrc/fields.hpp"

#include <cmath>

#include "polysrc/errors.hpp"
#include "polysrc/rng.hpp"

namespace polysrc::fields {

Vec3 VolumeGrid::node(size_t c) const {
  const int k = static_cast<int>(c % N);
  const int j = static_cast<int>((c / N) % N);
  const int i = static_cast<int>(c / (static_cast<size_t>(N) * N));
  return node(i, j, k);
}

VolumeGrid make_grid(double extent, int N) {
  if (!(extent >= 1.0) || !std::isfinite(extent)) {
    throw ConfigError("grid.extent must be >= 1");
  }
  if (N < 2) throw ConfigError("grid.N must be >= 2");
  if (N > 1024) throw ConfigError("grid.N must be <= 1024");
  VolumeGrid g;
  g.extent = extent;
  g.N = N;
  g.h = 2.0 * extent / N;
  g.cell_volume = g.h * g.h * g.h;
  return g;
}

ProfileSpec smooth_bump(double amplitude, double radius) {
  ProfileSpec p;
  p.kind = "smooth_bump";
  p.amplitude = amplitude;
  p.radius = radius;
  return p;
}

void ProfileSpec::validate() const {
  if (kind == "zero") return;
  if (kind != "smooth_bump" && kind != "gaussian_bump" && kind != "two_bumps" &&
      kind != "indicator") {
    throw ConfigError("unknown profile kind '" + kind + "'");
  }
  if (!std::isfinite(amplitude)) throw ConfigError("profile amplitude must be finite");
  if (!(radius > 0.0)) throw ConfigError("profile radius must be positive");
  if (kind == "two_bumps") {
    if (!(offset >= 0.0) || offset + radius > 1.0) {
      throw ConfigError("two_bumps: offset + radius must be <= 1");
    }
  } else if (radius > 1.0) {
    throw ConfigError("profile radius must be <= 1 (support inside the unit ball)");
  }
  if (kind == "gaussian_bump" && !(width > 0.0)) {
    throw ConfigError("gaussian_bump width must be positive");
  }
}

double ProfileSpec::support_radius() const {
  if (kind == "zero") return 0.0;
  if (kind == "two_bumps") return offset + radius;
  return radius;
}

namespace {

double bump(double r2, double rho) {
  const double s = r2 / (rho * rho);
  if (s >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s));
}

}  // namespace

double ProfileSpec::operator()(const Vec3& x) const {
  const double r2 = x.squaredNorm();
  if (kind == "zero" || r2 >= 1.0) return 0.0;
  if (kind == "smooth_bump") return amplitude * bump(r2, radius);
  if (kind == "gaussian_bump") {
    if (r2 >= radius * radius) return 0.0;
    return amplitude * std::exp(-r2 / (2.0 * width * width));
  }
  if (kind == "indicator") return r2 < radius * radius ? amplitude : 0.0;
  if (kind == "two_bumps") {
    const Vec3 c(offset, 0.0, 0.0);
    return amplitude * (bump((x - c).squaredNorm(), radius) + bump((x + c).squaredNorm(), radius));
  }
  throw ConfigError("unknown profile kind '" + kind + "'");
}

double StrengthField::integral() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc * grid.cell_volume;
}

std::vector<uint32_t> StrengthField::support() const {
  std::vector<uint32_t> out;
  for (size_t c = 0; c < values.size(); ++c) {
    if (values[c] > 0.0) out.push_back(static_cast<uint32_t>(c));
  }
  return out;
}

StrengthField sample_strength(const ProfileSpec& profile, const VolumeGrid& grid) {
  profile.validate();
  if (profile.amplitude < 0.0) throw ConfigError("strength amplitude must be >= 0");
  StrengthField f;
  f.grid = grid;
  f.profile = profile;
  f.values.resize(grid.size());
  f.sqrt_values.resize(grid.size());
  for (size_t c = 0; c < grid.size(); ++c) {
    const double v = profile(grid.node(c));
    f.values[c] = v;
    f.sqrt_values[c] = std::sqrt(v);
  }
  return f;
}

std::vector<uint32_t> PotentialField::support() const {
  std::vector<uint32_t> out;
  for (size_t c = 0; c < values.size(); ++c) {
    if (values[c] != 0.0) out.push_back(static_cast<uint32_t>(c));
  }
  return out;
}

PotentialField sample_potential(const ProfileSpec& profile, const VolumeGrid& grid) {
  profile.validate();
  PotentialField f;
  f.grid = grid;
  f.profile = profile;
  f.values.assign(grid.size(), 0.0);
  for (size_t c = 0; c < grid.size(); ++c) {
    const double v = profile(grid.node(c));
    f.values[c] = v;
    f.sup_norm = std::max(f.sup_norm, std::abs(v));
  }
  return f;
}

NoiseRealization sample_white_noise(const VolumeGrid& grid, uint64_t master_seed,
                                    uint64_t realization) {
  NoiseRealization w;
  w.master_seed = master_seed;
  w.realization = realization;
  w.increments.resize(grid.size());
  const double scale = std::sqrt(grid.cell_volume);
  for (size_t c = 0; c < grid.size(); ++c) {
    w.increments[c] = scale * rng::standard_normal(master_seed, realization, c);
  }
  return w;
}

void sample_white_noise(const VolumeGrid& grid, uint64_t master_seed, uint64_t realization,
                        std::span<const uint32_t> cells, double* out) {
  const double scale = std::sqrt(grid.cell_volume);
  for (size_t i = 0; i < cells.size(); ++i) {
    out[i] = scale * rng::standard_normal(master_seed, realization, cells[i]);
  }
}

cplx volume_pairing(const StrengthField& sigma, const NoiseRealization& w,
                    std::span<const cplx> U) {
  const size_t n = sigma.values.size();
  if (w.increments.size() != n || U.size() != n) {
    throw ShapeMismatchError("volume_pairing: sigma, noise and U sizes differ");
  }
  cplx acc = 0.0;
  for (size_t c = 0; c < n; ++c) {
    if (sigma.sqrt_values[c] != 0.0) acc += sigma.sqrt_values[c] * w.increments[c] * U[c];
  }
  return acc;
}

}  // namespace polysrc::fields
