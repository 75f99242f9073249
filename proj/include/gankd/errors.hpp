#pragma once

#include <stdexcept>
#include <string>

namespace gankd {

// Exit codes used by the CLI. Keep in sync with cli.cpp's error mapping.
enum ExitCode : int {
    exit_ok = 0,
    exit_generic = 1,
    exit_config = 2,
    exit_data = 3,
    exit_comparability = 4,
    exit_numeric = 5,
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ComparabilityError : std::runtime_error {
    explicit ComparabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace gankd
