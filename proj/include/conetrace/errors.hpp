#pragma once

#include <stdexcept>
#include <string>

namespace conetrace {

// Base of every error raised by the library. Callers that only care about
// "something went wrong numerically" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of the operation (z = 0, x <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Result not representable in double precision (e.g. unscaled I_nu overflow).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Request exceeds what the implementation supports (too many expansion
// terms, expansion window too shallow, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// 2m <= dim: the resolvent power is not trace class.
class TraceClassError : public Error {
 public:
  using Error::Error;
};

// Iterative method (quadrature, root finder, continued fraction) failed.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class IllConditionedError : public Error {
 public:
  IllConditionedError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// A symbol failed one of the Singular Asymptotics Lemma hypothesis probes.
class HypothesisError : public Error {
 public:
  HypothesisError(const std::string& what, std::string assumption)
      : Error(what), assumption_(std::move(assumption)) {}
  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace conetrace
