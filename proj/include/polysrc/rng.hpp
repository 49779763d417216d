#pragma once

#include <array>
#include <cstdint>

namespace polysrc::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<uint32_t, 4>;
  using Key = std::array<uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// Splitting rule: key = master seed (low, high words); counter =
/// (cell low, cell high, realization low, realization high). Every
/// (seed, realization, cell) triple owns one independent 128-bit block.
Philox4x32::Counter noise_block(uint64_t master_seed, uint64_t realization, uint64_t cell);

/// Standard normal draw for one (seed, realization, cell) triple: two 53-bit
/// uniforms from the block, Box-Muller cosine branch.
double standard_normal(uint64_t master_seed, uint64_t realization, uint64_t cell);

/// Uniform in [0, 1) with 53 random bits.
inline double uniform53(uint32_t hi, uint32_t lo) {
  const uint64_t bits = (static_cast<uint64_t>(hi) << 21) ^ (lo >> 11);
  return static_cast<double>(bits & ((uint64_t{1} << 53) - 1)) * 0x1.0p-53;
}

}  // namespace polysrc::rng
