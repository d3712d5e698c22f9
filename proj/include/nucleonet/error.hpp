#pragma once

#include <stdexcept>
#include <string>

namespace nucleo {

// Exit-code taxonomy: usage = 1, data/invariant = 2, numerical = 3.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nucleo
