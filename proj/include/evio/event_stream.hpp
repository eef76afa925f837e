#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evio/geometry.hpp"

namespace evio {

struct Event {
  TimeNs t = 0;
  std::int16_t x = 0;
  std::int16_t y = 0;
  std::int8_t p = 1;  // -1 or +1

  bool operator==(const Event&) const = default;
};

struct ImuSample {
  TimeNs t = 0;
  Vec3 accel = Vec3::Zero();  // m/s^2
  Vec3 gyro = Vec3::Zero();   // rad/s
};

struct EventPacket {
  TimeNs t0 = 0;
  TimeNs t1 = 0;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
};

struct AugmentedPacket {
  EventPacket packet;
  std::vector<ImuSample> imu;
  /// Gyro-integrated rotation from t0 to t1 (maps t1 body frame into t0 body frame).
  Rotation rotation_prior;
};

struct SensorSize {
  int width = 346;
  int height = 260;
};

/// Decimal seconds -> integer ns, round half to even, computed on the decimal string.
/// Returns false when the token is not a plain or exponent-form decimal.
bool parse_seconds(std::string_view token, TimeNs& out);
/// Integer ns -> "S.NNNNNNNNN".
std::string format_seconds(TimeNs t);

/// Reads `t_sec x y p` lines (p in {0,1}; 0 maps to -1). Blank lines and '#' comments are skipped.
/// Throws ParseError or NonMonotonicTimestamp carrying the 1-based line number.
std::vector<Event> ingest_events(std::istream& in, SensorSize sensor);
std::vector<Event> load_events(const std::filesystem::path& path, SensorSize sensor);
void write_events(std::ostream& out, std::span<const Event> events);

/// Reads `t_sec ax ay az gx gy gz` lines.
std::vector<ImuSample> ingest_imu(std::istream& in);
std::vector<ImuSample> load_imu(const std::filesystem::path& path);
void write_imu(std::ostream& out, std::span<const ImuSample> imu);

/// Packet k covers [k*(window-overlap), k*(window-overlap) + window). The first packet is the
/// latest one starting at or before the first event, the last is the first one reaching past
/// the final event; empty packets in between are not emitted.
std::vector<EventPacket> packetize(std::span<const Event> events, TimeNs window, TimeNs overlap);

/// Fixed-count alternative: packets of `count` events advancing by count - overlap events.
std::vector<EventPacket> packetize_by_count(std::span<const Event> events, std::size_t count,
                                            std::size_t overlap);

/// Zero-order-hold gyro integration between t0 and t1. `imu` must be sorted by time.
Rotation integrate_gyro(std::span<const ImuSample> imu, TimeNs t0, TimeNs t1);

/// Throws ImuGap unless some sample is at or before t0 and some at or after t1.
AugmentedPacket sync_imu(EventPacket packet, std::span<const ImuSample> imu);

}  // namespace evio
