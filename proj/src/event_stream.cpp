#include "evio/event_stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "evio/error.hpp"

namespace evio {

namespace {

constexpr TimeNs kNs = 1'000'000'000;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Splits on spaces/tabs; returns number of tokens written (at most N).
template <std::size_t N>
std::size_t split(std::string_view line, std::string_view (&tokens)[N]) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' ||
                               line[i] == ',')) {
      ++i;
    }
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
           line[i] != ',') {
      ++i;
    }
    if (count == N) return N + 1;
    tokens[count++] = line.substr(start, i - start);
  }
  return count;
}

bool skip_line(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

template <typename Int>
bool parse_int(std::string_view tok, Int& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_double(std::string_view tok, double& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

}  // namespace

bool parse_seconds(std::string_view tok, TimeNs& out) {
  if (tok.empty()) return false;
  if (tok.find_first_of("eE") != std::string_view::npos) {
    double v = 0.0;
    if (!parse_double(tok, v)) return false;
    out = static_cast<TimeNs>(std::nearbyint(v * 1e9));
    return true;
  }
  bool negative = false;
  std::size_t i = 0;
  if (tok[0] == '-' || tok[0] == '+') {
    negative = tok[0] == '-';
    ++i;
  }
  TimeNs whole = 0;
  std::size_t int_digits = 0;
  for (; i < tok.size() && is_digit(tok[i]); ++i, ++int_digits) {
    if (whole > (INT64_MAX / kNs) / 10) return false;
    whole = whole * 10 + (tok[i] - '0');
  }
  TimeNs frac = 0;
  std::size_t frac_digits = 0;
  bool above_half = false;
  bool exactly_half = false;
  if (i < tok.size() && tok[i] == '.') {
    ++i;
    for (; i < tok.size() && is_digit(tok[i]); ++i, ++frac_digits) {
      const int d = tok[i] - '0';
      if (frac_digits < 9) {
        frac = frac * 10 + d;
      } else if (frac_digits == 9) {
        above_half = d > 5;
        exactly_half = d == 5;
      } else if (d != 0 && exactly_half) {
        exactly_half = false;
        above_half = true;
      }
    }
  }
  if (i != tok.size() || int_digits + frac_digits == 0) return false;
  for (std::size_t k = std::min<std::size_t>(frac_digits, 9); k < 9; ++k) frac *= 10;
  TimeNs ns = whole * kNs + frac;
  if (above_half || (exactly_half && (ns % 2 != 0))) ++ns;
  out = negative ? -ns : ns;
  return true;
}

std::string format_seconds(TimeNs t) {
  std::string s;
  if (t < 0) {
    s.push_back('-');
    t = -t;
  }
  char frac[10];
  TimeNs f = t % kNs;
  for (int k = 8; k >= 0; --k) {
    frac[k] = static_cast<char>('0' + f % 10);
    f /= 10;
  }
  frac[9] = '\0';
  s += std::to_string(t / kNs);
  s.push_back('.');
  s += frac;
  return s;
}

std::vector<Event> ingest_events(std::istream& in, SensorSize sensor) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  TimeNs last_t = INT64_MIN;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    std::string_view tok[4];
    if (split(line, tok) != 4) throw Error(Errc::ParseError, "expected 't x y p'", line_no);
    Event e;
    int x = 0, y = 0, p = 0;
    if (!parse_seconds(tok[0], e.t)) throw Error(Errc::ParseError, "bad timestamp", line_no);
    if (!parse_int(tok[1], x) || !parse_int(tok[2], y) || !parse_int(tok[3], p)) {
      throw Error(Errc::ParseError, "bad integer field", line_no);
    }
    if (x < 0 || x >= sensor.width || y < 0 || y >= sensor.height) {
      throw Error(Errc::ParseError,
                  "pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") out of bounds",
                  line_no);
    }
    if (p != 0 && p != 1) throw Error(Errc::ParseError, "polarity must be 0 or 1", line_no);
    if (e.t < last_t) throw Error(Errc::NonMonotonicTimestamp, "timestamp decreases", line_no);
    last_t = e.t;
    e.x = static_cast<std::int16_t>(x);
    e.y = static_cast<std::int16_t>(y);
    e.p = p == 1 ? 1 : -1;
    events.push_back(e);
  }
  return events;
}

std::vector<Event> load_events(const std::filesystem::path& path, SensorSize sensor) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return ingest_events(in, sensor);
}

void write_events(std::ostream& out, std::span<const Event> events) {
  std::string buf;
  buf.reserve(1 << 16);
  for (const Event& e : events) {
    buf += format_seconds(e.t);
    buf.push_back(' ');
    buf += std::to_string(e.x);
    buf.push_back(' ');
    buf += std::to_string(e.y);
    buf.push_back(' ');
    buf.push_back(e.p > 0 ? '1' : '0');
    buf.push_back('\n');
    if (buf.size() > (1 << 16) - 64) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<ImuSample> ingest_imu(std::istream& in) {
  std::vector<ImuSample> imu;
  std::string line;
  std::size_t line_no = 0;
  TimeNs last_t = INT64_MIN;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    std::string_view tok[7];
    if (split(line, tok) != 7) {
      throw Error(Errc::ParseError, "expected 't ax ay az gx gy gz'", line_no);
    }
    ImuSample s;
    if (!parse_seconds(tok[0], s.t)) throw Error(Errc::ParseError, "bad timestamp", line_no);
    double v[6];
    for (int k = 0; k < 6; ++k) {
      if (!parse_double(tok[k + 1], v[k])) throw Error(Errc::ParseError, "bad value", line_no);
    }
    if (s.t < last_t) throw Error(Errc::NonMonotonicTimestamp, "timestamp decreases", line_no);
    last_t = s.t;
    s.accel = Vec3(v[0], v[1], v[2]);
    s.gyro = Vec3(v[3], v[4], v[5]);
    imu.push_back(s);
  }
  return imu;
}

std::vector<ImuSample> load_imu(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return ingest_imu(in);
}

void write_imu(std::ostream& out, std::span<const ImuSample> imu) {
  char buf[64];
  for (const ImuSample& s : imu) {
    out << format_seconds(s.t);
    for (double v : {s.accel.x(), s.accel.y(), s.accel.z(), s.gyro.x(), s.gyro.y(), s.gyro.z()}) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

namespace {

TimeNs floor_div(TimeNs a, TimeNs b) {
  TimeNs q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::vector<EventPacket> packetize(std::span<const Event> events, TimeNs window,
                                   TimeNs overlap) {
  if (window <= 0 || overlap < 0 || overlap >= window) {
    throw Error(Errc::InvalidWindow, "require 0 <= overlap < window");
  }
  std::vector<EventPacket> packets;
  if (events.empty()) return packets;
  const TimeNs stride = window - overlap;
  const TimeNs first_t = events.front().t;
  const TimeNs last_t = events.back().t;

  // Latest packet starting at or before the first event.
  TimeNs k = floor_div(first_t, stride);
  std::size_t lo = 0;
  for (;; ++k) {
    const TimeNs t0 = k * stride;
    const TimeNs t1 = t0 + window;
    while (lo < events.size() && events[lo].t < t0) ++lo;
    std::size_t hi = lo;
    while (hi < events.size() && events[hi].t < t1) ++hi;
    if (hi > lo) {
      EventPacket p;
      p.t0 = t0;
      p.t1 = t1;
      p.events.assign(events.begin() + static_cast<std::ptrdiff_t>(lo),
                      events.begin() + static_cast<std::ptrdiff_t>(hi));
      packets.push_back(std::move(p));
    }
    if (t1 > last_t) break;
  }
  return packets;
}

std::vector<EventPacket> packetize_by_count(std::span<const Event> events, std::size_t count,
                                            std::size_t overlap) {
  if (count == 0 || overlap >= count) {
    throw Error(Errc::InvalidWindow, "require 0 <= overlap < count");
  }
  std::vector<EventPacket> packets;
  const std::size_t stride = count - overlap;
  for (std::size_t start = 0; start < events.size(); start += stride) {
    const std::size_t end = std::min(events.size(), start + count);
    EventPacket p;
    p.events.assign(events.begin() + static_cast<std::ptrdiff_t>(start),
                    events.begin() + static_cast<std::ptrdiff_t>(end));
    p.t0 = p.events.front().t;
    p.t1 = p.events.back().t;
    packets.push_back(std::move(p));
    if (end == events.size()) break;
  }
  return packets;
}

Rotation integrate_gyro(std::span<const ImuSample> imu, TimeNs t0, TimeNs t1) {
  Rotation r;
  for (std::size_t j = 0; j < imu.size(); ++j) {
    const TimeNs seg_begin = std::max(imu[j].t, t0);
    const TimeNs seg_end = j + 1 < imu.size() ? std::min(imu[j + 1].t, t1) : t1;
    if (seg_end <= seg_begin) continue;
    const double dt = static_cast<double>(seg_end - seg_begin) / kNsPerSec;
    r = r * Rotation::exp(imu[j].gyro * dt);
  }
  return r;
}

AugmentedPacket sync_imu(EventPacket packet, std::span<const ImuSample> imu) {
  const bool covers_start = !imu.empty() && imu.front().t <= packet.t0;
  const bool covers_end = !imu.empty() && imu.back().t >= packet.t1;
  if (!covers_start || !covers_end) {
    throw Error(Errc::ImuGap, "IMU does not cover [" + format_seconds(packet.t0) + ", " +
                                  format_seconds(packet.t1) + "]");
  }
  auto first = std::upper_bound(imu.begin(), imu.end(), packet.t0,
                                [](TimeNs t, const ImuSample& s) { return t < s.t; });
  // Sample governing t0 under zero-order hold.
  const auto hold = first - 1;
  auto last = std::upper_bound(imu.begin(), imu.end(), packet.t1,
                               [](TimeNs t, const ImuSample& s) { return t < s.t; });

  AugmentedPacket ap;
  ap.rotation_prior = integrate_gyro(std::span(hold, last), packet.t0, packet.t1);
  auto within = std::lower_bound(imu.begin(), imu.end(), packet.t0,
                                 [](const ImuSample& s, TimeNs t) { return s.t < t; });
  ap.imu.assign(within, last);
  ap.packet = std::move(packet);
  return ap;
}

}  // namespace evio
