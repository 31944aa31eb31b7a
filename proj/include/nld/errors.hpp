#pragma once

#include <stdexcept>
#include <string>

namespace nld {

/// Invalid argument values (bounds, sizes, ranges).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs that are individually valid but do not fit together, e.g. a
/// fractional form requested on a mesh without a horizon layer.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A result that violates a structural guarantee (non-SPD stiffness,
/// negative Cholesky pivot). Usually points at a quadrature bug.
class NumericalIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Failure of a reference computation (test infrastructure, not product).
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nld
