// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splatcap {

/// Base of every error thrown by the library. Parsers and numerical routines
/// only ever throw subclasses of this type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Malformed input; `offset()` is the byte position where parsing stopped.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), mOffset(offset) {}

    std::uint64_t offset() const noexcept { return mOffset; }

private:
    std::uint64_t mOffset;
};

/// A required PLY property is missing or has the wrong type.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& property, const std::string& detail = "missing")
        : Error("schema error: property '" + property + "' " + detail), mProperty(property) {}

    const std::string& property() const noexcept { return mProperty; }

private:
    std::string mProperty;
};

class TruncatedError : public Error {
public:
    TruncatedError(std::uint64_t expected, std::uint64_t actual)
        : Error("truncated body: expected " + std::to_string(expected) + " bytes, got " +
                std::to_string(actual) + " (at byte offset " + std::to_string(actual) + ")"),
          mExpected(expected), mActual(actual) {}

    std::uint64_t expected() const noexcept { return mExpected; }
    std::uint64_t actual() const noexcept { return mActual; }

private:
    std::uint64_t mExpected;
    std::uint64_t mActual;
};

class UnsupportedModel : public Error {
public:
    using Error::Error;
};

/// An entity refers to another one that does not exist (e.g. image -> camera).
class ReferenceError : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InsufficientSeed : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace splatcap
