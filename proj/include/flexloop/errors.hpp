#pragma once

#include <stdexcept>
#include <string>

namespace flexloop {

// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Enumeration exceeded its node budget. Never silently degrades to an
// approximate count.
class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& what) : Error(what) {}
};

// A run hit a state with no feasible continuation (all-zero feedback) or an
// instance whose feasible set is empty.
class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& what) : Error(what) {}
};

// Bad inputs: malformed files, mismatched lengths, invalid arguments.
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& what) : Error(what) {}
};

// File could not be read or written.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace flexloop
