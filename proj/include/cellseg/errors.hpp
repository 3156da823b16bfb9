#pragma once

#include <stdexcept>
#include <string>

namespace cellseg {

// Process exit codes; the error hierarchy below maps onto them.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, divergence = 3 };

class Error : public std::runtime_error {
public:
    Error(const std::string& msg, ExitCode code) : std::runtime_error(msg), code_(code) {}
    ExitCode exit_code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Bad invocation or configuration: unknown command, malformed flag, invalid config value.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg, ExitCode::usage) {}
};

// Bad or inconsistent data: shape mismatch, unreadable file, unmapped mask value,
// empty dataset.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg, ExitCode::data) {}
};

// Training loss became non-finite.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg, ExitCode::divergence) {}
};

}  // namespace cellseg
