#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace polysrc::selftest {

struct Check {
  std::string name;
  double value = 0.0;      // measured quantity
  double tolerance = 0.0;  // pass when value <= tolerance
  bool passed = false;
  std::string detail;
};

struct Options {
  /// Evaluate every kernel through a sign-flipped copy. The suite must fail.
  bool inject_kernel_sign_flip = false;
};

/// Fast invariant suite: kernel identities, quadrature exactness, probe
/// algebra, FFT against direct convolution, the boundary functional against
/// the volume pairing, estimator identities.
std::vector<Check> run(const Options& opt = {});

bool all_passed(const std::vector<Check>& checks);
nlohmann::json to_json(const std::vector<Check>& checks);

}  // namespace polysrc::selftest
