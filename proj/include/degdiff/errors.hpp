#pragma once

#include <stdexcept>

namespace degdiff {

/// Invalid user-facing configuration (mesh sizes, parameter lists, scenario ids).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Request to invert an operator with a nontrivial kernel (e.g. F at kappa = 0).
class SingularOperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nonlinear solve that did not converge.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace degdiff
