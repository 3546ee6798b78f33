#pragma once

#include <stdexcept>
#include <string>

namespace hitlor {

// Every failure raised by the library derives from Error so callers (CLI,
// HTTP layer) can map it to a diagnostic without knowing the module.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A value violates a documented precondition (NaN payload, bad bbox, ...).
class ValidationError : public Error {
 public:
  ValidationError(std::string message, std::string field = {})
      : Error(std::move(message)), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Strategy/grid/dataset combination that cannot work.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class QueryError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

// Thrown by an oracle that gives up (human closed the tab, timeout). The
// session pauses with its state intact.
class OracleAbort : public Error {
 public:
  using Error::Error;
};

}  // namespace hitlor
