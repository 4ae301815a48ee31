#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slide {

enum class ErrorCode {
  AccelOutOfRange,
  DurationOutOfRange,
  SameSignAccels,
  ZeroInitialAccel,
  DimensionMismatch,
  PadTooShort,
  DegenerateTrace,
  DivisionByZero,
  Unreachable,
  RomExceeded,
  InvalidConfig,
  Io,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable error code.
class SlideError : public std::runtime_error {
 public:
  SlideError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace slide
