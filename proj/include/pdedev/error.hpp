#pragma once

#include <stdexcept>
#include <string>

namespace pdedev {

// Base of every error raised by the library. Subclasses map onto the CLI
// exit-code contract (see cli/commands.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterRangeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DegenerateDensityError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  InstabilityError(long step, const std::string& what)
      : Error("numerical instability at step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// An analytic oracle was asked for a regime where it does not hold.
class OracleInapplicableError : public Error {
 public:
  using Error::Error;
};

class MeasurementError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// The sandbox itself failed (temp dir, pipes, fork), as opposed to the tester.
class InfrastructureError : public Error {
 public:
  using Error::Error;
};

// A completion could not be parsed into the expected shape.
class FormatError : public Error {
 public:
  using Error::Error;
};

class CollisionError : public Error {
 public:
  using Error::Error;
};

// Chat backend transport failure after all retries.
class BackendError : public Error {
 public:
  BackendError(int attempts, const std::string& what)
      : Error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace pdedev
