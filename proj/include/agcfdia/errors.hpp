#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agcfdia {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input values or inconsistent configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The simulated closed loop produced a NaN or infinity.
class NonFiniteState : public Error {
 public:
  explicit NonFiniteState(std::size_t step)
      : Error("non-finite state at integration step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A series is too short for the requested feature kernel.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its content is malformed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t record)
      : Error(what + " (record " + std::to_string(record) + ")"), record_(record) {}
  explicit FormatError(const std::string& what) : Error(what), record_(0) {}

  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

/// Scenario generation kept hitting unstable simulations.
class GenerationExhausted : public Error {
 public:
  using Error::Error;
};

/// A class is missing or too small for a statistical test.
class DegenerateLabels : public Error {
 public:
  using Error::Error;
};

/// Feature counts of a model, mask or matrix disagree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class LabelOutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptyNode : public Error {
 public:
  using Error::Error;
};

class UnknownFormat : public Error {
 public:
  using Error::Error;
};

}  // namespace agcfdia
