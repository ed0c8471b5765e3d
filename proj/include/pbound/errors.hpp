#pragma once

#include <stdexcept>
#include <string>

namespace pbound {

// Error taxonomy. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command-line usage or invalid configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or semantically unusable input data (parse errors, I/O, one-class sets).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SingleClassError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

// The model predicts a single class over the whole grid.
class EmptyBoundaryError : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failures: factorization, convergence, simulation runaway.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonTerminationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace pbound
