#include "evio/error.hpp"

namespace evio {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::AngleNearPi: return "AngleNearPi";
    case Errc::BehindCamera: return "BehindCamera";
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::ParseError: return "ParseError";
    case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case Errc::InvalidWindow: return "InvalidWindow";
    case Errc::ImuGap: return "ImuGap";
    case Errc::DegeneratePacket: return "DegeneratePacket";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::BorderKeypoint: return "BorderKeypoint";
    case Errc::EmptyRoi: return "EmptyRoi";
    case Errc::DegenerateScale: return "DegenerateScale";
    case Errc::DegenerateBaseline: return "DegenerateBaseline";
    case Errc::ParallelRays: return "ParallelRays";
    case Errc::InsufficientInliers: return "InsufficientInliers";
    case Errc::SingularNormalEquations: return "SingularNormalEquations";
    case Errc::TrackingLost: return "TrackingLost";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::UnknownConfigKey: return "UnknownConfigKey";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

namespace {
std::string format_message(Errc code, const std::string& what, std::size_t line) {
  std::string msg(to_string(code));
  if (line > 0) msg += " (line " + std::to_string(line) + ")";
  if (!what.empty()) msg += ": " + what;
  return msg;
}
}  // namespace

Error::Error(Errc code, const std::string& what, std::size_t line)
    : std::runtime_error(format_message(code, what, line)), code_(code), line_(line) {}

}  // namespace evio
