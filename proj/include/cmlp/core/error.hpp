#pragma once

#include <stdexcept>
#include <string>

namespace cmlp {

/// Invalid configuration or usage. Raised before any data is touched.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed, missing, or unusable input data.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical procedures.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace cmlp
