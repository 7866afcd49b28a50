#pragma once

#include <stdexcept>
#include <string>

namespace trimodal {

// Base for every error the library raises. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

// Input is well-formed but geometrically degenerate (zero norm, coincident points).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Numerical failure (singular matrix, NaN loss).
class NumericError : public Error {
public:
    using Error::Error;
};

// A requested key or object id does not exist.
class LookupError : public Error {
public:
    using Error::Error;
};

}  // namespace trimodal
