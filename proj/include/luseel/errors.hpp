#pragma once

#include <stdexcept>
#include <string>

namespace luseel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid sizes, mismatched dimensions, unknown identifiers in a config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data violating a precondition (wrong channel count, empty prompt...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Silent clips and other inputs for which a gain or ratio is undefined.
// Scene simulation reacts by resampling.
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

// Missing or malformed files on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

// Non-finite activations or losses. `where` names the layer that produced them.
class NumericError : public Error {
 public:
  NumericError(const std::string& where, const std::string& what)
      : Error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class MetricUndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace luseel
