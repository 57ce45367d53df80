#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace affgeo {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text (expression or scenario file). `offset()` is a byte offset
/// into the expression text, or a line number for scenario files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A scenario file is missing, unreadable or has a malformed or missing field.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(const std::string& name, std::size_t offset)
      : ParseError("unknown identifier \"" + name + "\"", offset), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Evaluation left the domain of a partial operation (x/0, sqrt(-1), overflow).
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnboundVariable : public Error {
 public:
  explicit UnboundVariable(const std::string& name)
      : Error("unbound variable \"" + name + "\""), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A precondition or structural invariant of an argument does not hold.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace affgeo
