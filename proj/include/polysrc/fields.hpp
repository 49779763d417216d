#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polysrc/types.hpp"

namespace polysrc::fields {

/// Cell-centred uniform grid on the cube [-extent, extent]^3.
struct VolumeGrid {
  double extent = 1.0;
  int N = 0;
  double h = 0.0;
  double cell_volume = 0.0;

  size_t size() const { return static_cast<size_t>(N) * N * N; }
  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(i) * N + j) * N + k;
  }
  double coord(int i) const { return -extent + (i + 0.5) * h; }
  Vec3 node(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
  Vec3 node(size_t c) const;
};

VolumeGrid make_grid(double extent, int N);

/// Named profile with parameters. Kinds:
///   smooth_bump    a exp(1 - 1/(1 - |x/rho|^2)) on |x| < rho
///   gaussian_bump  a exp(-|x|^2 / (2 width^2)) truncated at |x| = rho
///   two_bumps      two smooth bumps of radius rho centred at +-offset e1
///   indicator      a on |x| < rho (non-smooth; diagnostics only)
///   zero
struct ProfileSpec {
  std::string kind = "smooth_bump";
  double amplitude = 1.0;
  double radius = 0.8;
  double width = 0.3;
  double offset = 0.4;
  double s_nominal = 3.5;

  void validate() const;
  double operator()(const Vec3& x) const;
  bool is_zero() const { return kind == "zero" || amplitude == 0.0; }
  bool is_radial() const { return kind != "two_bumps"; }
  /// Radius of a ball centred at 0 that contains the support.
  double support_radius() const;
};

ProfileSpec smooth_bump(double amplitude, double radius);

struct StrengthField {
  VolumeGrid grid;
  std::vector<double> values;
  std::vector<double> sqrt_values;
  ProfileSpec profile;

  /// Sum of sigma * cell_volume.
  double integral() const;
  /// Cells where sigma > 0, ascending.
  std::vector<uint32_t> support() const;
};

StrengthField sample_strength(const ProfileSpec& profile, const VolumeGrid& grid);

struct PotentialField {
  VolumeGrid grid;
  std::vector<cplx> values;
  double sup_norm = 0.0;
  ProfileSpec profile;

  bool is_zero() const { return sup_norm == 0.0; }
  std::vector<uint32_t> support() const;
};

/// Real potential from a profile. kind "zero" gives q = 0.
PotentialField sample_potential(const ProfileSpec& profile, const VolumeGrid& grid);

struct NoiseRealization {
  std::vector<double> increments;
  uint64_t master_seed = 0;
  uint64_t realization = 0;
};

/// Delta W_c ~ N(0, cell_volume) for every cell, keyed by (seed, realization, cell).
NoiseRealization sample_white_noise(const VolumeGrid& grid, uint64_t master_seed,
                                    uint64_t realization);

/// Increments on a subset of cells only; out[i] belongs to cells[i].
/// Values match sample_white_noise at the same cells.
void sample_white_noise(const VolumeGrid& grid, uint64_t master_seed, uint64_t realization,
                        std::span<const uint32_t> cells, double* out);

/// sum_c sqrt(sigma_c) U_c dW_c.
cplx volume_pairing(const StrengthField& sigma, const NoiseRealization& w,
                    std::span<const cplx> U);

}  // namespace polysrc::fields
