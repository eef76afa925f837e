#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace evio {

enum class Errc {
  AngleNearPi,
  BehindCamera,
  NonPositiveDepth,
  ParseError,
  NonMonotonicTimestamp,
  InvalidWindow,
  ImuGap,
  DegeneratePacket,
  DimensionMismatch,
  BorderKeypoint,
  EmptyRoi,
  DegenerateScale,
  DegenerateBaseline,
  ParallelRays,
  InsufficientInliers,
  SingularNormalEquations,
  TrackingLost,
  NoOverlap,
  DegenerateGeometry,
  InvalidArgument,
  UnknownConfigKey,
  Io,
};

std::string_view to_string(Errc code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::size_t line = 0);

  Errc code() const noexcept { return code_; }
  // 1-based input line for parse errors, 0 otherwise.
  std::size_t line() const noexcept { return line_; }

 private:
  Errc code_;
  std::size_t line_;
};

}  // namespace evio
