#pragma once

#include <stdexcept>
#include <string>

namespace degenctrl {

// Base of every error the library throws. Callers that only care about
// "something went wrong" catch this; the CLI maps it to exit status 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the admissible range of an operation (alpha outside (0,2),
// t outside (0,T), interval containing the degeneracy point, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// A constant violates a constraint it must satisfy (c2 too small, r <= 0).
class ConstraintError : public Error {
public:
    using Error::Error;
};

// Coefficient samples that cannot describe a diffusion coefficient.
class InvalidProfileError : public Error {
public:
    using Error::Error;
};

// Mismatched array lengths.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Inconsistent configuration or geometry.
class ConfigError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

// Singular banded system during time stepping.
class StepFailure : public Error {
public:
    StepFailure(const std::string& what, int time_index)
        : Error(what + " (time index " + std::to_string(time_index) + ")"),
          time_index_(time_index) {}
    int time_index() const noexcept { return time_index_; }

private:
    int time_index_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_value)
        : Error(what), last_value_(last_value) {}
    double last_value() const noexcept { return last_value_; }

private:
    double last_value_;
};

}  // namespace degenctrl
