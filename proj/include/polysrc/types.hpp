#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace polysrc {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

}  // namespace polysrc
