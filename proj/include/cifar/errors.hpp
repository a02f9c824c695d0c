#pragma once

#include <stdexcept>
#include <string>

namespace cifar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Laser detuning too close to an excited-state hyperfine resonance.
class PoleProximityError : public Error {
 public:
  using Error::Error;
};

/// Parameter set whose effective damping is not positive, or a diverging
/// trajectory.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class ZeroSigmaError : public Error {
 public:
  using Error::Error;
};

/// Profile scan reached a parameter bound before chi^2 rose by the target.
class NotBracketedError : public Error {
 public:
  using Error::Error;
};

/// Amplitude trace without an interior maximum and minimum.
class NoExtremumError : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. Carries the 1-based line number (0 if unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace cifar
