#pragma once

#include <stdexcept>
#include <string>

namespace driftwatch {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed a value outside an operation's domain.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of range or unknown.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A record does not conform to the declared attribute schema.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A score whose defining ratio has a zero denominator.
class UndefinedScore : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class AdaptationError : public Error {
 public:
  using Error::Error;
};

// Request conflicts with current service state (e.g. a duplicate analysis).
class Conflict : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace driftwatch
