#ifndef KIRCHHOFF_ERROR_HPP
#define KIRCHHOFF_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace kirchhoff
{

// Every failure the library reports. The CLI maps each code to its own
// exit status, so the numeric values are part of the external interface.
enum class ErrorCode
{
    SchemaError = 10,
    CycleDetected = 11,
    Disconnected = 12,
    NonPositiveLength = 13,
    CoefficientOutOfBounds = 14,
    BreakpointOutOfRange = 15,
    InvalidDegree = 16,
    NoReducibleVertex = 17,
    InvalidStep = 18,
    NotContractive = 20,
    ZeroFrequency = 21,
    SingularSystem = 22,
    BoundViolated = 23,
    ZeroTime = 30,
    UnsupportedData = 31,
    TruncationTooShort = 32,
    GridMismatch = 33,
    ExponentOutOfRange = 40,
    BlowUpSuspected = 41,
    OutOfRangeCoordinate = 50,
    ConfigError = 60,
    IoError = 61,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code)
    {
    }

    ErrorCode code() const noexcept
    {
        return code_;
    }

private:
    ErrorCode code_;
};

} // namespace kirchhoff

#endif // KIRCHHOFF_ERROR_HPP
