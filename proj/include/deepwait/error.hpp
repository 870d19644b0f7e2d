#pragma once

#include <stdexcept>
#include <string>

namespace deepwait {

// Error categories; the CLI maps each to a distinct exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// File-system and parse failures (missing file, malformed CSV cell, ...).
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

// Violated preconditions and invariants on inputs.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

// Numerical failures: singular Hessians, diverged training, non-finite values.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace deepwait
