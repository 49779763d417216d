#include "polysrc/rng.hpp"

#include <cmath>

namespace polysrc::rng {

namespace {

constexpr uint32_t kM0 = 0xD2511F53u;
constexpr uint32_t kM1 = 0xCD9E8D57u;
constexpr uint32_t kW0 = 0x9E3779B9u;
constexpr uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

Philox4x32::Counter noise_block(uint64_t master_seed, uint64_t realization, uint64_t cell) {
  const Philox4x32::Key key{static_cast<uint32_t>(master_seed),
                            static_cast<uint32_t>(master_seed >> 32)};
  const Philox4x32::Counter ctr{static_cast<uint32_t>(cell), static_cast<uint32_t>(cell >> 32),
                                static_cast<uint32_t>(realization),
                                static_cast<uint32_t>(realization >> 32)};
  return Philox4x32::block(ctr, key);
}

double standard_normal(uint64_t master_seed, uint64_t realization, uint64_t cell) {
  const auto w = noise_block(master_seed, realization, cell);
  const double u1 = 1.0 - uniform53(w[0], w[1]);  // (0, 1]
  const double u2 = uniform53(w[2], w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace polysrc::rng
