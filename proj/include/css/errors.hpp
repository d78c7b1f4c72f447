#pragma once

#include <stdexcept>
#include <string>

namespace css {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document.
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class OverflowError : public Error {
public:
    using Error::Error;
};

// Problem dimensions above a configured cap.
class SizeError : public Error {
public:
    using Error::Error;
};

// Solver or integrator failed to converge.
class NumericError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace css
