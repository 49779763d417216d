#include "polysrc/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "polysrc/errors.hpp"

namespace polysrc {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft3::Fft3(int n0, int n1, int n2) : dims_{n0, n1, n2} {
  if (n0 < 1 || n1 < 1 || n2 < 1) throw ConfigError("FFT dimensions must be positive");
  std::vector<cplx> scratch(size());
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_dft_3d(n0, n1, n2, buf, buf, FFTW_FORWARD, flags);
  bwd_ = fftw_plan_dft_3d(n0, n1, n2, buf, buf, FFTW_BACKWARD, flags);
  if (!fwd_ || !bwd_) throw NumericalError("FFTW plan creation failed");
}

Fft3::~Fft3() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

void Fft3::forward(cplx* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), buf, buf);
}

void Fft3::inverse(cplx* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(bwd_), buf, buf);
  const double s = 1.0 / static_cast<double>(size());
  for (size_t i = 0; i < size(); ++i) data[i] *= s;
}

}  // namespace polysrc
