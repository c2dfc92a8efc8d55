#pragma once

#include <stdexcept>
#include <string>

namespace qpole {

// Error taxonomy shared by every module. The CLI maps these onto exit
// codes: ConfigError -> 2, DataError -> 3, NumericError -> 4.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

// Raised when asked to differentiate a gate the shift rule does not cover.
class UnsupportedError : public std::runtime_error {
  public:
    explicit UnsupportedError(const std::string &msg)
        : std::runtime_error(msg) {}
};

} // namespace qpole
