#pragma once

#include <stdexcept>
#include <string>

namespace grassmix {

/// Bad argument or violated precondition.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// File or stream problem; message carries the path and, for parsers, a line number.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Burn-in adaptation exhausted its search without reaching the target window.
class TuningError : public std::runtime_error {
public:
    explicit TuningError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace grassmix
