// Error taxonomy mirrored by the CLI exit codes: usage/config problems,
// file I/O problems, and numeric failures during optimization.
#pragma once

#include <stdexcept>
#include <string>

namespace tomoreg {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tomoreg
