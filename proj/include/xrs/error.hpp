#pragma once

#include <stdexcept>
#include <string>

namespace xrs {

// User-facing failures (bad config, missing files, malformed data) derive from
// UserError; the CLI maps them to exit code 1. Everything else is internal.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

class IoError : public UserError {
 public:
  using UserError::UserError;
};

class DataError : public UserError {
 public:
  using UserError::UserError;
};

class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xrs
