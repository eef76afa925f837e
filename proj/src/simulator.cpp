#include "evio/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "evio/error.hpp"
#include "evio/evaluation.hpp"

namespace evio {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// std::floor is a library call on baseline x86-64; this is the hot path of every render.
inline double fast_floor(double x) {
  const double t = static_cast<double>(static_cast<long long>(x));
  return t > x ? t - 1.0 : t;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// +-1 square wave flipping sign at multiples of `period`, with a linear ramp of width 2 h
// centred on each flip.
double square_wave(double u, double period, double h) {
  const double q = u / period;
  const double k = fast_floor(q);
  const double frac = (q - k) * period;  // distance past the last flip
  const double dist = std::min(frac, period - frac);
  const double sign = (static_cast<long long>(k) & 1) ? -1.0 : 1.0;
  return sign * std::min(1.0, dist / h);
}

// Centre of the blob in grid cell (fi, fj): hashed jitter keeping the blob inside its cell.
Vec2 blob_centre(const Pattern& p, double fi, double fj) {
  const std::uint64_t h = splitmix(splitmix(static_cast<std::uint64_t>(static_cast<std::int64_t>(fi)) ^
                                            (static_cast<std::uint64_t>(p.seed) << 32)) ^
                                   static_cast<std::uint64_t>(static_cast<std::int64_t>(fj)));
  const double jx = static_cast<double>(h >> 32) * 0x1.0p-32;
  const double jy = static_cast<double>(h & 0xFFFFFFFFull) * 0x1.0p-32;
  const double slack = std::max(0.0, 0.5 * p.period - p.radius - p.edge_width);
  return {(fi + 0.5) * p.period + (2.0 * jx - 1.0) * slack,
          (fj + 0.5) * p.period + (2.0 * jy - 1.0) * slack};
}

double blob_profile(const Pattern& p, double dx, double dy) {
  const double h = 0.5 * p.edge_width;
  const double d2 = dx * dx + dy * dy;
  const double outer = p.radius + h;
  if (d2 >= outer * outer) return 0.0;
  return 1.0 - smoothstep(p.radius - h, outer, std::sqrt(d2));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::Constant: return "constant";
    case PatternKind::Checkerboard: return "checkerboard";
    case PatternKind::Stripes: return "stripes";
    case PatternKind::Blobs: return "blobs";
  }
  return "checkerboard";
}

PatternKind parse_pattern(std::string_view name) {
  const std::string s = lower(name);
  if (s == "constant") return PatternKind::Constant;
  if (s == "checkerboard" || s == "checker") return PatternKind::Checkerboard;
  if (s == "stripes" || s == "stripe") return PatternKind::Stripes;
  if (s == "blobs" || s == "random-blob" || s == "dots") return PatternKind::Blobs;
  throw Error(Errc::InvalidArgument, "unknown scene pattern: " + std::string(name));
}

double Pattern::value(double a, double b) const {
  const double h = 0.5 * edge_width;
  switch (kind) {
    case PatternKind::Constant:
      return 0.5;
    case PatternKind::Checkerboard:
      return 0.5 + 0.5 * square_wave(a, period, h) * square_wave(b, period, h);
    case PatternKind::Stripes:
      return 0.5 + 0.5 * square_wave(a, period, h);
    case PatternKind::Blobs: {
      const double fi = fast_floor(a / period), fj = fast_floor(b / period);
      const Vec2 c = blob_centre(*this, fi, fj);
      return blob_profile(*this, a - c.x(), b - c.y());
    }
  }
  return 0.0;
}

Scene Scene::floor(const Pattern& pattern) {
  Scene s;
  Plane p;
  p.half_extent_x = p.half_extent_y = 50.0;
  p.pattern = pattern;
  s.planes.push_back(p);
  s.background = pattern.base;
  return s;
}

std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Static: return "static";
    case TrajectoryKind::Line: return "line";
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::Square: return "square";
    case TrajectoryKind::YawSpin: return "yaw-spin";
    case TrajectoryKind::Spline: return "spline";
  }
  return "circle";
}

TrajectoryKind parse_trajectory(std::string_view name) {
  const std::string s = lower(name);
  if (s == "static") return TrajectoryKind::Static;
  if (s == "line") return TrajectoryKind::Line;
  if (s == "circle") return TrajectoryKind::Circle;
  if (s == "square") return TrajectoryKind::Square;
  if (s == "yaw-spin" || s == "yawspin" || s == "yaw_spin") return TrajectoryKind::YawSpin;
  if (s == "spline") return TrajectoryKind::Spline;
  throw Error(Errc::InvalidArgument, "unknown trajectory: " + std::string(name));
}

Trajectory::Trajectory(TrajectoryParams params) : params_(params) {
  if (!(params_.duration > 0.0)) throw Error(Errc::InvalidArgument, "duration must be positive");
  if (params_.kind == TrajectoryKind::Square &&
      !(params_.corner_radius > 0.0 && 2.0 * params_.corner_radius <= params_.side)) {
    throw Error(Errc::InvalidArgument, "square corner radius must be in (0, side / 2]");
  }
  if (params_.kind == TrajectoryKind::Spline) {
    if (params_.spline_points < 4) throw Error(Errc::InvalidArgument, "spline needs >= 4 points");
    std::mt19937 gen(params_.seed);
    auto u = [&gen] { return static_cast<double>(gen()) / 4294967296.0; };
    for (int i = 0; i < params_.spline_points; ++i) {
      const double th = 2.0 * kPi * i / params_.spline_points;
      const double r = params_.spline_extent * (0.6 + 0.4 * u());
      const double dz = 0.2 * (u() - 0.5);
      control_.emplace_back(r * std::cos(th), r * std::sin(th), params_.height + dz);
    }
  }
}

namespace {

struct Angles {
  double v = 0.0, d = 0.0;  // value and rate
};

}  // namespace

TrajectoryState Trajectory::state(double t) const {
  const TrajectoryParams& P = params_;
  Vec3 p(0.0, 0.0, P.height), v = Vec3::Zero(), a = Vec3::Zero();
  Angles yaw;
  switch (P.kind) {
    case TrajectoryKind::Static:
      break;
    case TrajectoryKind::Line:
      p += P.velocity * (t - 0.5 * P.duration);
      v = P.velocity;
      break;
    case TrajectoryKind::Circle: {
      const double w = 2.0 * kPi * P.frequency;
      const double c = std::cos(w * t), s = std::sin(w * t);
      p += Vec3(P.radius * c, P.radius * s, 0.0);
      v = Vec3(-P.radius * w * s, P.radius * w * c, 0.0);
      a = Vec3(-P.radius * w * w * c, -P.radius * w * w * s, 0.0);
      break;
    }
    case TrajectoryKind::Square: {
      const double rc = P.corner_radius;
      const double ls = P.side - 2.0 * rc;
      const double arc = 0.5 * kPi * rc;
      const double perimeter = 4.0 * (ls + arc);
      const double speed = perimeter / P.lap_time;
      double s = std::fmod(speed * t, perimeter);
      if (s < 0.0) s += perimeter;
      const double hs = 0.5 * ls, hh = 0.5 * P.side;
      // Four (edge, corner) pairs, counter-clockwise from the bottom edge.
      const Vec2 starts[4] = {{-hs, -hh}, {hh, -hs}, {hs, hh}, {-hh, hs}};
      const Vec2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      const Vec2 centres[4] = {{hs, -hs}, {hs, hs}, {-hs, hs}, {-hs, -hs}};
      const int k = std::min(3, static_cast<int>(s / (ls + arc)));
      const double r = s - k * (ls + arc);
      Vec2 pos, vel, acc = Vec2::Zero();
      if (r < ls) {
        pos = starts[k] + r * dirs[k];
        vel = speed * dirs[k];
      } else {
        const double th = -0.5 * kPi + 0.5 * kPi * k + (r - ls) / rc;
        const Vec2 radial(std::cos(th), std::sin(th));
        pos = centres[k] + rc * radial;
        vel = speed * Vec2(-radial.y(), radial.x());
        acc = -(speed * speed / rc) * radial;
      }
      p += Vec3(pos.x(), pos.y(), 0.0);
      v = Vec3(vel.x(), vel.y(), 0.0);
      a = Vec3(acc.x(), acc.y(), 0.0);
      break;
    }
    case TrajectoryKind::YawSpin:
      yaw = {P.yaw_rate * t, P.yaw_rate};
      break;
    case TrajectoryKind::Spline: {
      const int n = static_cast<int>(control_.size());
      const double tseg = P.lap_time / n;
      double q = t / tseg;
      const double fk = std::floor(q);
      const double u = q - fk;
      const int k = static_cast<int>(((static_cast<long long>(fk) % n) + n) % n);
      const Vec3& P0 = control_[(k + n - 1) % n];
      const Vec3& P1 = control_[k];
      const Vec3& P2 = control_[(k + 1) % n];
      const Vec3& P3 = control_[(k + 2) % n];
      const Vec3 c1 = P2 - P0;
      const Vec3 c2 = 2.0 * P0 - 5.0 * P1 + 4.0 * P2 - P3;
      const Vec3 c3 = -P0 + 3.0 * P1 - 3.0 * P2 + P3;
      p = 0.5 * (2.0 * P1 + c1 * u + c2 * u * u + c3 * u * u * u);
      v = 0.5 * (c1 + 2.0 * c2 * u + 3.0 * c3 * u * u) / tseg;
      a = 0.5 * (2.0 * c2 + 6.0 * c3 * u) / (tseg * tseg);
      const double w = 2.0 * kPi / P.lap_time;
      yaw = {0.2 * std::sin(w * t), 0.2 * w * std::cos(w * t)};
      break;
    }
  }

  Angles roll, pitch;
  if (P.wobble_amplitude != 0.0) {
    const double w = 2.0 * kPi * P.wobble_frequency;
    roll = {P.wobble_amplitude * std::sin(w * t), P.wobble_amplitude * w * std::cos(w * t)};
    pitch = {P.wobble_amplitude * std::sin(1.3 * w * t + 0.5),
             P.wobble_amplitude * 1.3 * w * std::cos(1.3 * w * t + 0.5)};
  }
  const Rotation Rz = Rotation::exp(Vec3(0, 0, yaw.v));
  const Rotation Rx = Rotation::exp(Vec3(roll.v, 0, 0));
  const Rotation Ry = Rotation::exp(Vec3(0, pitch.v, 0));
  const Rotation R0 = Rotation::from_quaternion(0.0, 1.0, 0.0, 0.0);  // diag(1, -1, -1)
  TrajectoryState st;
  st.pose.rotation = Rz * Rx * Ry * R0;
  st.pose.translation = p;
  st.velocity = v;
  st.acceleration = a;
  const Vec3 w_world = Vec3(0, 0, yaw.d) + Rz * Vec3(roll.d, 0, 0) + (Rz * Rx) * Vec3(0, pitch.d, 0);
  st.angular_velocity = st.pose.rotation.inverse() * w_world;
  return st;
}

std::vector<StampedPose> Trajectory::sample(double rate) const {
  if (!(rate > 0.0)) throw Error(Errc::InvalidArgument, "sample rate must be positive");
  const auto n = static_cast<long long>(std::floor(params_.duration * rate + 1e-9));
  std::vector<StampedPose> out;
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long long k = 0; k <= n; ++k) {
    const TimeNs t = std::llround(static_cast<double>(k) * kNsPerSec / rate);
    out.push_back({t, pose_at(t)});
  }
  return out;
}

namespace {

struct PlaneRay {
  Mat3 M;  // camera ray -> plane frame direction
  Vec3 c;  // camera centre in plane frame
  const Plane* plane;
  // Last blob cell looked up; neighbouring pixels usually share it.
  double cell_i = std::numeric_limits<double>::quiet_NaN();
  double cell_j = std::numeric_limits<double>::quiet_NaN();
  Vec2 centre = Vec2::Zero();

  double log_intensity(double a, double b) {
    const Pattern& p = plane->pattern;
    if (p.kind != PatternKind::Blobs) return p.log_intensity(a, b);
    const double fi = fast_floor(a / p.period), fj = fast_floor(b / p.period);
    if (fi != cell_i || fj != cell_j) {
      cell_i = fi;
      cell_j = fj;
      centre = blob_centre(p, fi, fj);
    }
    return p.base + p.contrast * blob_profile(p, a - centre.x(), b - centre.y());
  }
};

// Nearest plane hit for the camera ray (xn, yn, 1); returns z-depth, or 0 on a miss.
double cast(std::vector<PlaneRay>& planes, double xn, double yn, double background, double& log_i) {
  double best = std::numeric_limits<double>::infinity();
  PlaneRay* hit = nullptr;
  double ha = 0.0, hb = 0.0;
  for (PlaneRay& pr : planes) {
    const double dz = pr.M(2, 0) * xn + pr.M(2, 1) * yn + pr.M(2, 2);
    if (std::abs(dz) < 1e-12) continue;
    const double lambda = -pr.c.z() / dz;
    if (!(lambda > 0.0) || lambda >= best) continue;
    const double a = pr.c.x() + lambda * (pr.M(0, 0) * xn + pr.M(0, 1) * yn + pr.M(0, 2));
    const double b = pr.c.y() + lambda * (pr.M(1, 0) * xn + pr.M(1, 1) * yn + pr.M(1, 2));
    if (std::abs(a) > pr.plane->half_extent_x || std::abs(b) > pr.plane->half_extent_y) continue;
    best = lambda;
    hit = &pr;
    ha = a;
    hb = b;
  }
  if (hit == nullptr) {
    log_i = background;
    return 0.0;
  }
  log_i = hit->log_intensity(ha, hb);
  return best;
}

// Single plane seen through a pinhole: the ray direction is affine in x along a row, so the
// inner loop reduces to one division plus the pattern.
template <PatternKind K>
void render_single_plane(PlaneRay& pr, const Camera& cam, double background, GrayImage& out,
                         DepthMap* depth) {
  const Pattern& pat = pr.plane->pattern;
  const double hx = pr.plane->half_extent_x, hy = pr.plane->half_extent_y;
  const double h = 0.5 * pat.edge_width;
  const Mat3& M = pr.M;
  const double inv_fx = 1.0 / cam.fx();
  for (int y = 0; y < out.height(); ++y) {
    const double yn = (y - cam.cy()) / cam.fy();
    const double a0 = M(0, 1) * yn + M(0, 2), b0 = M(1, 1) * yn + M(1, 2), z0 = M(2, 1) * yn + M(2, 2);
    float* row = out.row(y);
    float* drow = depth != nullptr ? depth->row(y) : nullptr;
    for (int x = 0; x < out.width(); ++x) {
      const double xn = (x - cam.cx()) * inv_fx;
      const double dz = z0 + M(2, 0) * xn;
      const double lambda = std::abs(dz) < 1e-12 ? -1.0 : -pr.c.z() / dz;
      const double a = pr.c.x() + lambda * (a0 + M(0, 0) * xn);
      const double b = pr.c.y() + lambda * (b0 + M(1, 0) * xn);
      if (!(lambda > 0.0) || std::abs(a) > hx || std::abs(b) > hy) {
        row[x] = static_cast<float>(background);
        if (drow != nullptr) drow[x] = 0.0f;
        continue;
      }
      double v;
      if constexpr (K == PatternKind::Blobs) {
        v = pr.log_intensity(a, b);
      } else if constexpr (K == PatternKind::Checkerboard) {
        v = pat.base + pat.contrast * (0.5 + 0.5 * square_wave(a, pat.period, h) *
                                                 square_wave(b, pat.period, h));
      } else if constexpr (K == PatternKind::Stripes) {
        v = pat.base + pat.contrast * (0.5 + 0.5 * square_wave(a, pat.period, h));
      } else {
        v = pat.log_intensity(a, b);
      }
      row[x] = static_cast<float>(v);
      if (drow != nullptr) drow[x] = static_cast<float>(lambda);
    }
  }
}

}  // namespace

GrayImage render_log_intensity(const Scene& scene, const Pose& pose, const Camera& cam,
                               bool supersample, DepthMap* depth) {
  std::vector<PlaneRay> planes;
  for (const Plane& pl : scene.planes) {
    const Mat3 Rp_t = pl.pose.rotation.matrix().transpose();
    planes.push_back({Rp_t * pose.rotation.matrix(), Rp_t * (pose.translation - pl.pose.translation), &pl});
  }
  const int W = cam.width(), H = cam.height();
  GrayImage out(W, H);
  if (depth != nullptr) *depth = DepthMap(W, H, 0.0f);
  const bool distorted = cam.has_distortion();
  if (planes.size() == 1 && !distorted && !supersample) {
    switch (planes[0].plane->pattern.kind) {
      case PatternKind::Blobs:
        render_single_plane<PatternKind::Blobs>(planes[0], cam, scene.background, out, depth);
        break;
      case PatternKind::Checkerboard:
        render_single_plane<PatternKind::Checkerboard>(planes[0], cam, scene.background, out, depth);
        break;
      case PatternKind::Stripes:
        render_single_plane<PatternKind::Stripes>(planes[0], cam, scene.background, out, depth);
        break;
      case PatternKind::Constant:
        render_single_plane<PatternKind::Constant>(planes[0], cam, scene.background, out, depth);
        break;
    }
    return out;
  }
  auto normalized = [&](double u, double v) {
    const Vec2 n((u - cam.cx()) / cam.fx(), (v - cam.cy()) / cam.fy());
    return distorted ? cam.undistort(n) : n;
  };
  for (int y = 0; y < H; ++y) {
    float* row = out.row(y);
    float* drow = depth != nullptr ? depth->row(y) : nullptr;
    for (int x = 0; x < W; ++x) {
      double li = 0.0;
      const Vec2 n = normalized(x, y);
      const double z = cast(planes, n.x(), n.y(), scene.background, li);
      if (supersample) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          const Vec2 ns = normalized(x + ((k & 1) ? 0.25 : -0.25), y + ((k & 2) ? 0.25 : -0.25));
          double l = 0.0;
          cast(planes, ns.x(), ns.y(), scene.background, l);
          acc += l;
        }
        li = 0.25 * acc;
      }
      row[x] = static_cast<float>(li);
      if (drow != nullptr) drow[x] = static_cast<float>(z);
    }
  }
  return out;
}

DepthMap render_depth(const Scene& scene, const Pose& pose, const Camera& cam) {
  DepthMap d;
  render_log_intensity(scene, pose, cam, false, &d);
  return d;
}

EventGenerator::EventGenerator(int width, int height, const EventGenConfig& cfg)
    : width_(width), height_(height), cfg_(cfg), rng_(cfg.seed) {
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "sensor size must be positive");
  if (!(cfg.contrast > 0.0)) throw Error(Errc::InvalidArgument, "contrast threshold must be positive");
  if (cfg.refractory < 0) throw Error(Errc::InvalidArgument, "refractory period must be >= 0");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  ref_.assign(n, 0.0);
  prev_.assign(n, 0.0f);
  prev_depth_.assign(n, 0.0f);
  last_event_.assign(n, std::numeric_limits<TimeNs>::min());
}

void EventGenerator::add_frame(TimeNs t, const GrayImage& log_intensity, const DepthMap* depth) {
  if (log_intensity.width() != width_ || log_intensity.height() != height_) {
    throw Error(Errc::DimensionMismatch, "frame size differs from sensor size");
  }
  const std::size_t n = static_cast<std::size_t>(width_) * height_;
  const float* L = log_intensity.data();
  const float* D = depth != nullptr ? depth->data() : nullptr;
  if (!started_) {
    for (std::size_t i = 0; i < n; ++i) {
      ref_[i] = L[i];
      prev_[i] = L[i];
      prev_depth_[i] = D ? D[i] : 0.0f;
    }
    started_ = true;
    t_prev_ = t;
    return;
  }
  if (t <= t_prev_) throw Error(Errc::NonMonotonicTimestamp, "frames must advance in time");
  struct Pending {
    Event e;
    float d;
  };
  std::vector<Pending> batch;
  const double C = cfg_.contrast;
  const double dt = static_cast<double>(t - t_prev_);
  for (std::size_t i = 0; i < n; ++i) {
    const double cur = L[i];
    double& ref = ref_[i];
    if (cur < ref + C && cur > ref - C) {
      prev_[i] = L[i];
      if (D) prev_depth_[i] = D[i];
      continue;
    }
    const double before = prev_[i];
    const float d0 = prev_depth_[i], d1 = D ? D[i] : 0.0f;
    for (;;) {
      double level;
      std::int8_t pol;
      if (cur >= ref + C) {
        level = ref + C;
        pol = 1;
      } else if (cur <= ref - C) {
        level = ref - C;
        pol = -1;
      } else {
        break;
      }
      const double frac = cur != before ? std::clamp((level - before) / (cur - before), 0.0, 1.0) : 1.0;
      const TimeNs te = t_prev_ + std::llround(frac * dt);
      ref = level;
      if (last_event_[i] == std::numeric_limits<TimeNs>::min() || te - last_event_[i] >= cfg_.refractory) {
        last_event_[i] = te;
        const auto x = static_cast<std::int16_t>(i % width_);
        const auto y = static_cast<std::int16_t>(i / width_);
        batch.push_back({Event{te, x, y, pol}, static_cast<float>(d0 + frac * (d1 - d0))});
      }
    }
    prev_[i] = L[i];
    if (D) prev_depth_[i] = D[i];
  }
  if (cfg_.noise_rate > 0.0) {
    const double mean = cfg_.noise_rate * static_cast<double>(n) * dt / kNsPerSec;
    std::poisson_distribution<long long> count(mean);
    const long long k = count(rng_);
    for (long long j = 0; j < k; ++j) {
      const std::size_t i = rng_() % n;
      const TimeNs te = t_prev_ + 1 + static_cast<TimeNs>(rng_() % static_cast<std::uint64_t>(t - t_prev_));
      const std::int8_t pol = (rng_() & 1) ? 1 : -1;
      batch.push_back({Event{te, static_cast<std::int16_t>(i % width_),
                             static_cast<std::int16_t>(i / width_), pol},
                       prev_depth_[i]});
    }
  }
  std::stable_sort(batch.begin(), batch.end(), [](const Pending& a, const Pending& b) {
    if (a.e.t != b.e.t) return a.e.t < b.e.t;
    if (a.e.y != b.e.y) return a.e.y < b.e.y;
    return a.e.x < b.e.x;
  });
  for (const Pending& p : batch) {
    events_.push_back(p.e);
    depth_.push_back(p.d);
  }
  t_prev_ = t;
}

std::vector<ImuSample> generate_imu(const Trajectory& traj, double rate, const ImuNoise& noise) {
  if (!(rate > 0.0)) throw Error(Errc::InvalidArgument, "IMU rate must be positive");
  std::mt19937 gen(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<long long>(std::floor(traj.duration() * rate + 1e-9));
  std::vector<ImuSample> out;
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long long k = 0; k <= n; ++k) {
    ImuSample s;
    s.t = std::llround(static_cast<double>(k) * kNsPerSec / rate);
    const TrajectoryState st = traj.state(static_cast<double>(s.t) / kNsPerSec);
    s.gyro = st.angular_velocity;
    s.accel = st.pose.rotation.inverse() * (st.acceleration - kGravity);
    if (noise.gyro_sigma > 0.0 || noise.accel_sigma > 0.0) {
      for (int j = 0; j < 3; ++j) s.gyro[j] += noise.gyro_sigma * gauss(gen);
      for (int j = 0; j < 3; ++j) s.accel[j] += noise.accel_sigma * gauss(gen);
    }
    out.push_back(s);
  }
  return out;
}

GroundTruthDepth::GroundTruthDepth(Scene scene, Trajectory traj, Camera cam, double scale,
                                   double noise_sigma, std::uint32_t seed)
    : scene_(std::move(scene)), traj_(std::move(traj)), cam_(cam), scale_(scale),
      noise_(noise_sigma), seed_(seed) {
  if (!(scale > 0.0)) throw Error(Errc::InvalidArgument, "depth scale must be positive");
}

DepthMap GroundTruthDepth::depth_at(TimeNs t) const {
  DepthMap d = render_depth(scene_, traj_.pose_at(t), cam_);
  std::mt19937 gen(static_cast<std::uint32_t>(splitmix(static_cast<std::uint64_t>(t) ^ seed_)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (float& v : d.pixels()) {
    if (!valid_depth(v)) continue;
    double s = scale_;
    if (noise_ > 0.0) s *= std::max(0.05, 1.0 + noise_ * gauss(gen));
    v = static_cast<float>(v * s);
  }
  return d;
}

Camera default_camera() { return Camera(240.0, 240.0, 173.0, 130.0, 346, 260); }

SimulationResult simulate(const SimulationConfig& cfg) {
  const Trajectory traj(cfg.trajectory);
  const Camera& cam = cfg.camera;
  SimulationResult out;
  out.camera = cam;
  EventGenerator gen(cam.width(), cam.height(), cfg.events);
  if (!(cfg.events.sample_rate > 0.0)) throw Error(Errc::InvalidArgument, "sample rate must be positive");
  const auto steps = static_cast<long long>(std::floor(traj.duration() * cfg.events.sample_rate + 1e-9));
  TimeNs next_depth = 0;
  const double depth_period = cfg.depth_rate > 0.0 ? kNsPerSec / cfg.depth_rate : 0.0;
  long long depth_index = 0;
  DepthMap depth;
  for (long long k = 0; k <= steps; ++k) {
    const TimeNs t = std::llround(static_cast<double>(k) * kNsPerSec / cfg.events.sample_rate);
    const GrayImage L = render_log_intensity(cfg.scene, traj.pose_at(t), cam,
                                             cfg.events.supersample, &depth);
    gen.add_frame(t, L, &depth);
    if (depth_period > 0.0 && t >= next_depth) {
      out.depth_frames.emplace_back(t, depth);
      ++depth_index;
      next_depth = std::llround(static_cast<double>(depth_index) * depth_period);
    }
  }
  out.events = gen.take_events();
  out.event_depth = gen.take_depth();
  out.imu = generate_imu(traj, cfg.imu_rate, cfg.imu_noise);
  out.groundtruth = traj.sample(cfg.groundtruth_rate);
  return out;
}

void export_dataset(const SimulationResult& sim, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "depth", ec);
  if (ec) throw Error(Errc::Io, "cannot create " + (dir / "depth").string() + ": " + ec.message());
  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw Error(Errc::Io, "cannot write " + p.string());
    return f;
  };
  {
    auto f = open(dir / "events.txt");
    write_events(f, sim.events);
    if (!f) throw Error(Errc::Io, "write failed: " + (dir / "events.txt").string());
  }
  {
    auto f = open(dir / "imu.txt");
    write_imu(f, sim.imu);
    if (!f) throw Error(Errc::Io, "write failed: " + (dir / "imu.txt").string());
  }
  save_trajectory(dir / "groundtruth.txt", sim.groundtruth);
  {
    auto f = open(dir / "calib.txt");
    write_calibration(f, sim.camera);
    if (!f) throw Error(Errc::Io, "write failed: " + (dir / "calib.txt").string());
  }
  for (const auto& [t, d] : sim.depth_frames) {
    write_pgm16(dir / "depth" / (std::to_string(t) + ".pgm"), depth_to_pgm16(d));
  }
}

Dataset load_dataset(const std::filesystem::path& dir, SensorSize sensor) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(Errc::Io, "dataset directory not found: " + dir.string());
  for (const char* name : {"events.txt", "calib.txt"}) {
    if (!fs::exists(dir / name)) throw Error(Errc::Io, "missing " + (dir / name).string());
  }
  Dataset ds;
  ds.camera = load_calibration(dir / "calib.txt", sensor.width, sensor.height);
  ds.events = load_events(dir / "events.txt", sensor);
  if (fs::exists(dir / "imu.txt")) ds.imu = load_imu(dir / "imu.txt");
  if (fs::exists(dir / "groundtruth.txt")) ds.groundtruth = load_trajectory(dir / "groundtruth.txt");
  if (fs::is_directory(dir / "depth") && !fs::is_empty(dir / "depth")) ds.depth_dir = dir / "depth";
  return ds;
}

}  // namespace evio
