#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twb {

enum class ErrorCategory {
  config,
  shape,
  integration,
  empty_ensemble,
  numerical,
  io,
  usage,
};

constexpr std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::integration: return "integration";
    case ErrorCategory::empty_ensemble: return "empty_ensemble";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::io: return "io";
    case ErrorCategory::usage: return "usage";
  }
  return "unknown";
}

/// Base exception for every failure raised by the library. The category is
/// what the CLI reports as its machine-readable error class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::shape, what) {}
};

class EmptyEnsembleError : public Error {
 public:
  explicit EmptyEnsembleError(const std::string& what)
      : Error(ErrorCategory::empty_ensemble, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Non-finite field values. Carries the simulation time and, once the
/// ensemble layer has attached it, the trajectory index (-1 if unknown).
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double t, long long trajectory = -1)
      : Error(ErrorCategory::integration, decorate(what, t, trajectory)),
        detail_(what),
        t_(t),
        trajectory_(trajectory) {}

  double time() const noexcept { return t_; }
  long long trajectory() const noexcept { return trajectory_; }

  IntegrationError with_trajectory(long long index) const {
    return IntegrationError(detail_, t_, index);
  }

 private:
  static std::string decorate(const std::string& what, double t, long long trajectory) {
    std::string s = what + " at t=" + std::to_string(t);
    if (trajectory >= 0) s += " (trajectory " + std::to_string(trajectory) + ")";
    return s;
  }

  std::string detail_;
  double t_;
  long long trajectory_;
};

}  // namespace twb
