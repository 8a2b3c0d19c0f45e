#pragma once

#include <stdexcept>
#include <string>

namespace tnsupernet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete run configuration.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed input documents (supernets, benchmark tables, triples).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed self-checks, oracle mismatches.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A configured enumeration or contraction cap would be exceeded.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace tnsupernet
