#include "slide/error.hpp"

namespace slide {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AccelOutOfRange: return "AccelOutOfRange";
    case ErrorCode::DurationOutOfRange: return "DurationOutOfRange";
    case ErrorCode::SameSignAccels: return "SameSignAccels";
    case ErrorCode::ZeroInitialAccel: return "ZeroInitialAccel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PadTooShort: return "PadTooShort";
    case ErrorCode::DegenerateTrace: return "DegenerateTrace";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::RomExceeded: return "RomExceeded";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace slide
