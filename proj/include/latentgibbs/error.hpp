#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latentgibbs {

enum class ErrorCode {
  invalid_argument,
  unsupported_operator,
  convergence_failure,
  size_exceeded,
  grid_too_narrow,
  undefined_variance,
  io_failure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::invalid_argument: return "invalid-argument";
  case ErrorCode::unsupported_operator: return "unsupported-operator";
  case ErrorCode::convergence_failure: return "convergence-failure";
  case ErrorCode::size_exceeded: return "size-exceeded";
  case ErrorCode::grid_too_narrow: return "grid-too-narrow";
  case ErrorCode::undefined_variance: return "undefined-variance";
  case ErrorCode::io_failure: return "io-failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Raised when conjugate gradient exhausts its iteration budget.
class ConvergenceFailure : public Error {
public:
  ConvergenceFailure(double residual, std::size_t iterations)
      : Error(ErrorCode::convergence_failure,
              "conjugate gradient did not converge after " +
                  std::to_string(iterations) +
                  " iterations (residual norm " + std::to_string(residual) +
                  ")"),
        residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

private:
  double residual_;
  std::size_t iterations_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string &what) {
  if (!condition)
    throw Error(ErrorCode::invalid_argument, what);
}

} // namespace latentgibbs
