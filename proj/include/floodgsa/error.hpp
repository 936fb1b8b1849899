#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace floodgsa {

/// Base class of every domain error raised by the toolkit. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ExtentError : public Error {
 public:
  using Error::Error;
};

class UnsupportedResolution : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class EmptyStoreError : public Error {
 public:
  using Error::Error;
};

// Zero output variance: first-order indices are undefined.
class DegenerateOutput : public Error {
 public:
  using Error::Error;
};

// A model evaluated during propagation returned a non-finite value.
class PropagationError : public Error {
 public:
  using Error::Error;
};

class NumericalInstability : public Error {
 public:
  NumericalInstability(std::size_t row, std::size_t col, double t, const std::string& what)
      : Error(what + " at cell (" + std::to_string(row) + ", " + std::to_string(col) +
              ") t=" + std::to_string(t) + " s"),
        row_(row),
        col_(col),
        t_(t) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }
  double time() const noexcept { return t_; }

 private:
  std::size_t row_;
  std::size_t col_;
  double t_;
};

}  // namespace floodgsa
