#pragma once

#include <stdexcept>
#include <string>

namespace datlab {

// Error categories map to CLI exit codes (see tools/).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error("usage error: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// Raised when training hits non-finite values; carries the failing iteration.
struct TrainingError : Error {
    long long iteration;
    TrainingError(const std::string& msg, long long iter)
        : Error("training error at iteration " + std::to_string(iter) + ": " + msg),
          iteration(iter) {}
};

struct AttackError : Error {
    int iteration;
    AttackError(const std::string& msg, int iter)
        : Error("attack error at iteration " + std::to_string(iter) + ": " + msg),
          iteration(iter) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace datlab
