#pragma once

#include <stdexcept>
#include <string>

namespace polysrc {

/// Invalid input or configuration. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (divergence, non-convergence, conditioning).
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularPointError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ShapeMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SolverDivergenceError : public NumericalError {
 public:
  SolverDivergenceError(const std::string& what, int iterations, double residual)
      : NumericalError(what + " (iterations=" + std::to_string(iterations) +
                       ", relative residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class FrequencyRangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class AdmissibilityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BoxCoverageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Fixed-point iteration stopped contracting.
class NonContractionError : public NumericalError {
 public:
  NonContractionError(const std::string& what, double ratio)
      : NumericalError(what + " (observed ratio=" + std::to_string(ratio) + ")"), ratio_(ratio) {}
  double ratio() const noexcept { return ratio_; }

 private:
  double ratio_;
};

/// I/O failures: missing files, bad magic, checksum mismatch.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polysrc
