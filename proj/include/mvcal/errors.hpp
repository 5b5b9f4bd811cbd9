#pragma once

#include <stdexcept>
#include <string>

namespace mvcal {

/// Bad run configuration (CLI exit status 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (CLI exit status 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mvcal
