#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace klpriv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths of the arguments do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An input that must hold at least one element was empty.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// An argument is outside its documented domain.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A linear system has no unique solution; carries the numerical rank found.
class RankDeficientError : public Error {
public:
    RankDeficientError(std::size_t rank, std::size_t dim);

    std::size_t rank() const noexcept { return rank_; }
    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t rank_;
    std::size_t dim_;
};

/// Malformed input file (CSV or config).
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace klpriv
