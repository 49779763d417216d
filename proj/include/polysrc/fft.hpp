#pragma once

#include <array>

#include "polysrc/types.hpp"

namespace polysrc {

/// In-place 3-D complex FFT on row-major n0 x n1 x n2 arrays (last index
/// fastest). Plans are built with FFTW_ESTIMATE so results do not depend on
/// timing. Thread-safe: plan creation is serialized internally, execution
/// uses the new-array interface on caller buffers.
class Fft3 {
 public:
  Fft3(int n0, int n1, int n2);
  ~Fft3();
  Fft3(const Fft3&) = delete;
  Fft3& operator=(const Fft3&) = delete;

  size_t size() const { return static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2]; }
  const std::array<int, 3>& dims() const { return dims_; }

  /// Unnormalized forward transform, sign -1.
  void forward(cplx* data) const;
  /// Inverse transform including the 1/size factor.
  void inverse(cplx* data) const;

 private:
  std::array<int, 3> dims_;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

}  // namespace polysrc
