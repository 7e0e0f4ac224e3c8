#pragma once

#include <stdexcept>
#include <string>

namespace analogc {

/// Base class for every diagnostic raised by the toolchain.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 1-based position of a character in source text.
struct SourcePos {
    int line = 1;
    int column = 1;

    friend bool operator==(const SourcePos&, const SourcePos&) = default;
};

/// An error that points at a location in DSL source.
class SourceError : public Error {
public:
    SourceError(SourcePos pos, const std::string& message)
        : Error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message),
          pos_(pos), message_(message) {}

    SourcePos pos() const { return pos_; }
    int line() const { return pos_.line; }
    int column() const { return pos_.column; }
    const std::string& message() const { return message_; }

private:
    SourcePos pos_;
    std::string message_;
};

} // namespace analogc
