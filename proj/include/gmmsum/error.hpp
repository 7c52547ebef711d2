#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmmsum {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Unknown dimension index, missing GMM key or missing precomputed data.
class NotFound : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class NonFiniteValue : public FormatError {
public:
    NonFiniteValue(std::string attribute, std::size_t row)
        : FormatError("non-finite value in attribute '" + attribute + "' at row " + std::to_string(row)),
          attribute_(std::move(attribute)),
          row_(row) {}

    const std::string& attribute() const { return attribute_; }
    std::size_t row() const { return row_; }

private:
    std::string attribute_;
    std::size_t row_;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

}  // namespace gmmsum
