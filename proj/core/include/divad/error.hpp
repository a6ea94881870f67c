#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace divad {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or matrix shapes disagree with what an operation expects.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An operation received no usable data (e.g. a window longer than its sequence).
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// Argument outside its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Index out of range (domain labels, event types).
class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid or infeasible configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Object used before it was fitted / loaded.
class StateError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class FormatError : public Error {
public:
    using Error::Error;
};

using WarningHandler = std::function<void(const std::string&)>;

// Warnings go to stderr unless a handler is installed. Tests install one to
// observe them.
void warn(const std::string& message);
WarningHandler set_warning_handler(WarningHandler handler);

/// Installs a handler for the lifetime of the guard and restores the previous one.
class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler handler)
        : previous_(set_warning_handler(std::move(handler))) {}
    ~ScopedWarningHandler() { set_warning_handler(std::move(previous_)); }
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

private:
    WarningHandler previous_;
};

}  // namespace divad
