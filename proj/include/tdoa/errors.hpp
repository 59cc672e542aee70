#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tdoa {

/// Base class for all library failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid user input: bad dimensions, malformed files, inconsistent config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Source coincides with a sensor, or geometry makes a quantity undefined.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// A linear system is too ill-conditioned to solve reliably.
class IllConditionedError : public Error {
 public:
  IllConditionedError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// Sensor deployment cannot support the requested estimate (rank deficiency,
/// Fisher matrix singular, Q not positive definite, ...).
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

/// The noise-variance cubic produced no admissible root.
class VarianceEstimationError : public Error {
 public:
  VarianceEstimationError(const std::string& what, std::vector<double> roots,
                          std::vector<double> sign_values)
      : Error(what), roots_(std::move(roots)), sign_values_(std::move(sign_values)) {}
  const std::vector<double>& roots() const { return roots_; }
  const std::vector<double>& sign_values() const { return sign_values_; }

 private:
  std::vector<double> roots_;
  std::vector<double> sign_values_;
};

/// File-system failure, annotated with the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdoa
