#pragma once

#include <stdexcept>
#include <string>

namespace esd {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input data violated a format or invariant (bad line, duplicate id, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// A caller passed arguments outside an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A remote or stub provider (embedding, LLM) failed to produce a usable reply.
class ProviderError : public Error {
public:
    using Error::Error;
};

}  // namespace esd
