#include "kirchhoff/error.hpp"

namespace kirchhoff
{

std::string_view error_name(ErrorCode code)
{
    switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::NonPositiveLength: return "NonPositiveLength";
    case ErrorCode::CoefficientOutOfBounds: return "CoefficientOutOfBounds";
    case ErrorCode::BreakpointOutOfRange: return "BreakpointOutOfRange";
    case ErrorCode::InvalidDegree: return "InvalidDegree";
    case ErrorCode::NoReducibleVertex: return "NoReducibleVertex";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::NotContractive: return "NotContractive";
    case ErrorCode::ZeroFrequency: return "ZeroFrequency";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::ZeroTime: return "ZeroTime";
    case ErrorCode::UnsupportedData: return "UnsupportedData";
    case ErrorCode::TruncationTooShort: return "TruncationTooShort";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::ExponentOutOfRange: return "ExponentOutOfRange";
    case ErrorCode::BlowUpSuspected: return "BlowUpSuspected";
    case ErrorCode::OutOfRangeCoordinate: return "OutOfRangeCoordinate";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

} // namespace kirchhoff
