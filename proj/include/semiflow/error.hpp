#pragma once

#include <stdexcept>
#include <string>

namespace semiflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time or index lies outside the admissible range.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// A duration is not an integer multiple of the grid step.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Two trajectories live on grids with different steps.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

/// The end of the head path and the start of the tail path differ by more
/// than the splice tolerance.
class SpliceMismatchError : public Error {
 public:
  SpliceMismatchError(const std::string& what, double gap) : Error(what), gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

/// A sampled path is too short for the quadrature horizon of a functional.
class InsufficientHorizonError : public Error {
 public:
  InsufficientHorizonError(const std::string& what, double required)
      : Error(what), required_(required) {}
  double required_horizon() const noexcept { return required_; }

 private:
  double required_;
};

class ExhaustedEnumerationError : public Error {
 public:
  using Error::Error;
};

/// Combinatorial growth beyond a configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A state falls outside the declared domain of a generator.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A finite Markov model is inconsistent (for example an empty constraint set
/// at a reachable state).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Conditioning on an event of probability zero.
class UndefinedConditionalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace semiflow
