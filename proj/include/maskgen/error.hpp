#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace maskgen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data violates a documented invariant (duplicate ids, bad ratios, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input text. `line()` is 1-based, or 0 when not line oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Remote predictor sent something that does not follow the wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Transport-level failure talking to a remote predictor.
class ConnectionError : public Error {
public:
    using Error::Error;
};

}  // namespace maskgen
