#pragma once

#include <stdexcept>
#include <string>

namespace firmgrowth {

// Invalid parameters, model configuration or CLI usage. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Problems with input data or with data-dependent computations
// (malformed panels, insufficient observations, degenerate series).
// CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace firmgrowth
