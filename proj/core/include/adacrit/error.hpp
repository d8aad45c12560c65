#pragma once

#include <stdexcept>
#include <string>

namespace adacrit {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    IllPosed,
    NonConvergence,
    SingularSystem,
    DegenerateFit,
    ZeroTraceV,
    NoFeasibleCandidate,
    DegenerateDenominator,
    ConfigSchema,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace adacrit
