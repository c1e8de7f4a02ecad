#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace hrex {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NotPositiveSemidefinite,
    EmbeddingNotPSD,
    InvalidDeltaSpec,
    SupportTooLarge,
    Io,
    Parse,
};

/// Name used on every machine-readable surface (CLI stderr, C API, JSON).
const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

/// %.6g rendering for error messages.
inline std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace hrex
