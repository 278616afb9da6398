#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msop {

/// Root of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax error while parsing an expression; carries the byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifierError : public ParseError {
 public:
  UnknownIdentifierError(const std::string& name, std::size_t offset)
      : ParseError("unknown identifier '" + name + "'", offset), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Arithmetic domain violation during evaluation (log of nonpositive, x/0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Chart transition attempted at a point the target chart does not cover.
class PoleSingularityError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure tagged with the module that raised it.
class NumericalError : public Error {
 public:
  NumericalError(std::string module, const std::string& what)
      : Error(module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace msop
