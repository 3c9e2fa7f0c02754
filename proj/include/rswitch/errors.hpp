#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rswitch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model callback produced a value that violates the model contract
/// (negative or non-finite rate, band violation, ...).
class InvalidModel : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Operation not available for this kind of model (e.g. exact event-driven
/// simulation of a state-dependent switching rate).
class Unsupported : public Error {
 public:
  using Error::Error;
};

class MissingMetadata : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when a simulated state becomes non-finite. Carries the state at the
/// start of the offending step.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(double t, std::vector<double> x, int regime);

  double time() const noexcept { return t_; }
  const std::vector<double>& state() const noexcept { return x_; }
  int regime() const noexcept { return regime_; }

 private:
  double t_;
  std::vector<double> x_;
  int regime_;
};

}  // namespace rswitch
