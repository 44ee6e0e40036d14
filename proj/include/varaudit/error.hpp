#pragma once

#include <stdexcept>
#include <string>

namespace varaudit {

// Base of every error raised by the library. Subclasses name the failing
// contract so callers (and the CLI) can report without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Declared column missing from a CSV header.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Cell that cannot be parsed as the declared type.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t row, std::string column)
        : Error(msg + " (row " + std::to_string(row) + ", column '" + column + "')"),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

// Recipe mapping does not cover a value, or drops every row.
class RecipeError : public Error {
public:
    using Error::Error;
};

// Split or resample would produce an empty side.
class SizeError : public Error {
public:
    using Error::Error;
};

// Bad arguments: dimension mismatch, non-finite features, out-of-range indices.
class InputError : public Error {
public:
    using Error::Error;
};

// Quantity requested outside the domain where it is defined (e.g. B < 2).
class DomainError : public Error {
public:
    using Error::Error;
};

// Internal bookkeeping inconsistency, e.g. an SC value that is not on the grid.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace varaudit
