#pragma once

#include <stdexcept>
#include <string>

namespace rainstat {

/// Broad failure classes; the CLI maps these onto exit codes.
enum class ErrorKind {
  argument,   // bad caller input (wrong k, p outside range, ...)
  range,      // coordinate outside a grid
  alignment,  // grids that must share geometry do not
  parse,      // malformed file content
  data,       // well-formed input that violates a data contract
  empty,      // nothing left to compute on
  solver,     // numerical procedure failed to converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ErrorKind::argument, what) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorKind::range, what) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what)
      : Error(ErrorKind::alignment, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorKind::parse,
              source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class EmptyDataError : public Error {
 public:
  explicit EmptyDataError(const std::string& what)
      : Error(ErrorKind::empty, what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what)
      : Error(ErrorKind::solver, what) {}
};

/// Raised by a multi-stage pipeline; keeps the kind of the failure it wraps.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage " + stage + ": " + cause.what()),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace rainstat
