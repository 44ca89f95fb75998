#pragma once

#include <stdexcept>
#include <string>

namespace spmtl {

/// Schema, parse, dimension, and configuration failures. The CLI maps these
/// to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File access failures, reported with path context.
class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical failures during training (e.g. an inner solver that did not
/// reach its tolerance). The CLI maps these to exit code 1.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace spmtl
