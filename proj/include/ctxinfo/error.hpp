#pragma once

#include <stdexcept>
#include <string>

namespace ctxinfo {

// Error categories map onto the CLI exit codes (1 config, 2 data, 3 numeric).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ctxinfo
