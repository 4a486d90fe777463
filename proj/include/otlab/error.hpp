#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace otlab {

enum class ErrorKind {
  shape,
  degenerate_input,
  domain,
  range,
  parameter,
  numerical,
  dimension,
  capacity,
  input,
  convergence,
  step,
  projection,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::degenerate_input: return "degenerate input";
    case ErrorKind::domain: return "domain";
    case ErrorKind::range: return "range";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::input: return "input";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::step: return "step";
    case ErrorKind::projection: return "projection";
  }
  return "unknown";
}

/// Every failure raised by the library. Iterative solvers attach the residual
/// they stopped at.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<double> residual = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind),
        residual_(residual) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<double> residual() const noexcept { return residual_; }

 private:
  ErrorKind kind_;
  std::optional<double> residual_;
};

}  // namespace otlab
