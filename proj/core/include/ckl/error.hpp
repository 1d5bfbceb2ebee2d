#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ckl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mandatory input file is missing or unreadable.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. Carries the offending file and 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Tensor shapes do not conform for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the documented domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ckl
