#pragma once

#include <stdexcept>
#include <string>

namespace semiiv {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Bad input data or configuration (lengths, missing columns, invalid ranges).
class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(message) {}
};

// A local or global least-squares problem could not support even a constant fit.
class SingularFitError : public Error {
 public:
  explicit SingularFitError(const std::string& message) : Error(message) {}
};

// Residual sum of squares too small for a finite BIC (the fit interpolates).
class InterpolationError : public Error {
 public:
  explicit InterpolationError(const std::string& message) : Error(message) {}
};

// A structural model description that cannot be sampled.
class SpecError : public Error {
 public:
  explicit SpecError(const std::string& message) : Error(message) {}
};

}  // namespace semiiv
