#pragma once

#include <stdexcept>
#include <string>

namespace desos {

enum class ErrorKind {
    parse,       // malformed input file
    validation,  // domain invariant violated
    dimension,   // mismatched sizes between coupled objects
    solver,      // conic solve did not reach the requested status
    io,          // filesystem failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace desos
