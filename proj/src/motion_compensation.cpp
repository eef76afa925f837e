#include "evio/motion_compensation.hpp"

#include <algorithm>
#include <cmath>

#include "evio/error.hpp"
#include "evio/kernels.hpp"
#include "evio/parallel.hpp"

namespace evio {

WarpedEvent warp_event(const Event& e, const Pose& ref_from_event, double depth,
                       const Camera& cam, const AlignmentCorrection& corr) {
  WarpedEvent out;
  out.t = e.t;
  out.p = e.p;
  const Vec3 X = ref_from_event * cam.backproject(Vec2(e.x, e.y), depth);
  if (!(X.z() > 1e-6)) {
    out.valid = false;
    return out;
  }
  const Vec2 px = cam.project(X) - corr.delta;
  out.x = px.x();
  out.y = px.y();
  return out;
}

namespace {

constexpr std::size_t kWarpChunk = 1024;

void warp_pinhole(const EventPacket& packet, const Twist& xi, double alpha_ref,
                  const WarpDepth& depth, const Camera& cam, const AlignmentCorrection& corr,
                  int threads, CompensatedPacket& out) {
  kernels::WarpParams params;
  const Vec6 v = xi.vector();
  for (int k = 0; k < 3; ++k) {
    params.rho[k] = v[k];
    params.phi[k] = v[k + 3];
  }
  params.alpha_ref = alpha_ref;
  params.fx = cam.fx();
  params.fy = cam.fy();
  params.cx = cam.cx();
  params.cy = cam.cy();
  params.corr_x = corr.delta.x();
  params.corr_y = corr.delta.y();

  const auto& table = kernels::active();
  const double span = static_cast<double>(packet.t1 - packet.t0);
  const std::size_t n = packet.events.size();
  out.events.resize(n);

  parallel_chunks(n, threads, [&](std::size_t b, std::size_t e, std::size_t) {
    double xs[kWarpChunk], ys[kWarpChunk], as[kWarpChunk], ds[kWarpChunk];
    double us[kWarpChunk], vs[kWarpChunk];
    std::uint8_t ok[kWarpChunk];
    for (std::size_t s = b; s < e; s += kWarpChunk) {
      const std::size_t m = std::min(kWarpChunk, e - s);
      for (std::size_t i = 0; i < m; ++i) {
        const Event& ev = packet.events[s + i];
        xs[i] = ev.x;
        ys[i] = ev.y;
        as[i] = std::clamp(static_cast<double>(ev.t - packet.t0) / span, 0.0, 1.0);
        ds[i] = depth.at(ev.x, ev.y);
      }
      table.warp(params, kernels::WarpBatch{xs, ys, as, ds, us, vs, ok, m});
      for (std::size_t i = 0; i < m; ++i) {
        const Event& ev = packet.events[s + i];
        out.events[s + i] = WarpedEvent{us[i], vs[i], ev.t, ev.p, ok[i] != 0};
      }
    }
  });
}

void warp_generic(const EventPacket& packet, const Twist& xi, double alpha_ref,
                  const WarpDepth& depth, const Camera& cam, const AlignmentCorrection& corr,
                  bool rectify, int threads, CompensatedPacket& out) {
  const Camera target = rectify ? cam.pinhole() : cam;
  const double span = static_cast<double>(packet.t1 - packet.t0);
  const std::size_t n = packet.events.size();
  out.events.resize(n);
  parallel_chunks(n, threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      const Event& ev = packet.events[i];
      const double a = std::clamp(static_cast<double>(ev.t - packet.t0) / span, 0.0, 1.0);
      const double s = a - alpha_ref;
      const Pose rel = s == 0.0 ? Pose::identity() : se3_exp(xi * s);
      WarpedEvent w;
      w.t = ev.t;
      w.p = ev.p;
      const Vec3 X = rel * cam.backproject(Vec2(ev.x, ev.y), depth.at(ev.x, ev.y));
      if (X.z() > 1e-6) {
        const Vec2 px = target.project(X) - corr.delta;
        w.x = px.x();
        w.y = px.y();
      } else {
        w.valid = false;
      }
      out.events[i] = w;
    }
  });
}

}  // namespace

CompensatedPacket compensate_packet(const EventPacket& packet, const Pose& T0, const Pose& T1,
                                    const WarpDepth& depth, const Camera& cam,
                                    const AlignmentCorrection& corr,
                                    const CompensationOptions& opts) {
  if (packet.t1 <= packet.t0) {
    throw Error(Errc::DegeneratePacket, "packet has zero duration");
  }
  if (!(depth.scene() > 0.0)) throw Error(Errc::NonPositiveDepth, "scene depth must be positive");
  const double alpha_ref = opts.ref_time == RefTime::Mid ? 0.5 : 0.0;
  CompensatedPacket out;
  out.ref_time = opts.ref_time == RefTime::Mid ? packet.t0 + (packet.t1 - packet.t0) / 2
                                               : packet.t0;
  // Reference-from-event at alpha: exp((alpha - alpha_ref) * log(T0^-1 T1)).
  const Twist xi = se3_log(T0.inverse() * T1);
  const int threads = resolve_threads(opts.threads);
  if (!cam.has_distortion()) {
    warp_pinhole(packet, xi, alpha_ref, depth, cam, corr, threads, out);
  } else {
    warp_generic(packet, xi, alpha_ref, depth, cam, corr, opts.rectify, threads, out);
  }
  for (const WarpedEvent& w : out.events) out.behind_camera += w.valid ? 0 : 1;
  return out;
}

CompensatedPacket compensate_packet(const AugmentedPacket& packet, const Pose& T0,
                                    const Pose& T1, const WarpDepth& depth, const Camera& cam,
                                    const AlignmentCorrection& corr,
                                    const CompensationOptions& opts) {
  return compensate_packet(packet.packet, T0, T1, depth, cam, corr, opts);
}

EventFrame accumulate_frame(std::span<const WarpedEvent> events, int width, int height,
                            FrameMode mode, TimeNs ref_time) {
  EventFrame frame{Image<double>(width, height, 0.0), mode, ref_time, 0};
  constexpr double kQ = kSplatSubpixel;
  constexpr double kNorm = 1.0 / (kQ * kQ);
  const double xmax = width - 1, ymax = height - 1;
  for (const WarpedEvent& e : events) {
    if (!e.valid || !(e.x >= 0.0 && e.y >= 0.0 && e.x <= xmax && e.y <= ymax)) {
      ++frame.out_of_bounds;
      continue;
    }
    int x0 = static_cast<int>(e.x);
    int y0 = static_cast<int>(e.y);
    int qx = static_cast<int>(std::lround((e.x - x0) * kQ));
    int qy = static_cast<int>(std::lround((e.y - y0) * kQ));
    if (qx == kSplatSubpixel) { ++x0; qx = 0; }
    if (qy == kSplatSubpixel) { ++y0; qy = 0; }
    const double m = mode == FrameMode::Signed ? static_cast<double>(e.p) : 1.0;
    const double w00 = (kSplatSubpixel - qx) * (kSplatSubpixel - qy) * kNorm * m;
    frame.grid(x0, y0) += w00;
    if (qx != 0) frame.grid(x0 + 1, y0) += qx * (kSplatSubpixel - qy) * kNorm * m;
    if (qy != 0) frame.grid(x0, y0 + 1) += (kSplatSubpixel - qx) * qy * kNorm * m;
    if (qx != 0 && qy != 0) frame.grid(x0 + 1, y0 + 1) += qx * qy * kNorm * m;
  }
  return frame;
}

EventFrame accumulate_frame(std::span<const WarpedEvent> events, const Camera& cam,
                            FrameMode mode, TimeNs ref_time) {
  return accumulate_frame(events, cam.width(), cam.height(), mode, ref_time);
}

EventFrame merge_frames(const EventFrame& a, const EventFrame& b) {
  if (!a.grid.same_shape(b.grid) || a.mode != b.mode) {
    throw Error(Errc::DimensionMismatch, "frames differ in shape or mode");
  }
  EventFrame out = a;
  auto dst = out.grid.pixels();
  auto src = b.grid.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  out.out_of_bounds += b.out_of_bounds;
  return out;
}

namespace {

constexpr int kSearch = 5;
constexpr double kMinPeak = 0.1;

// Summed-area table with one row and column of zero padding.
class Integral {
 public:
  Integral(const Image<double>& img, bool squared) : w_(img.width() + 1), s_(w_ * (img.height() + 1), 0.0) {
    for (int y = 0; y < img.height(); ++y) {
      double run = 0.0;
      const double* r = img.row(y);
      for (int x = 0; x < img.width(); ++x) {
        run += squared ? r[x] * r[x] : r[x];
        at(x + 1, y + 1) = at(x + 1, y) + run;
      }
    }
  }
  // Sum over [x0, x1) x [y0, y1).
  double sum(int x0, int y0, int x1, int y1) const {
    return s_[idx(x1, y1)] - s_[idx(x0, y1)] - s_[idx(x1, y0)] + s_[idx(x0, y0)];
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  double& at(int x, int y) { return s_[idx(x, y)]; }
  std::size_t w_;
  std::vector<double> s_;
};

struct Nonzero {
  int x, y;
  double v;
};

// NCC between prev(x, y) and cur(x + dx, y + dy) over the overlap. Event frames are mostly
// empty, so the cross term runs over the nonzero pixels of prev only.
class NccSearch {
 public:
  NccSearch(const Image<double>& a, const Image<double>& b)
      : a_(a), b_(b), sa_(a, false), saa_(a, true), sb_(b, false), sbb_(b, true) {
    for (int y = 0; y < a.height(); ++y) {
      const double* r = a.row(y);
      for (int x = 0; x < a.width(); ++x) {
        if (r[x] != 0.0) nz_.push_back({x, y, r[x]});
      }
    }
  }

  double at(int dx, int dy) const {
    const int w = a_.width(), h = a_.height();
    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
    if (x1 <= x0 || y1 <= y0) return 0.0;
    const double sa = sa_.sum(x0, y0, x1, y1), saa = saa_.sum(x0, y0, x1, y1);
    const double sb = sb_.sum(x0 + dx, y0 + dy, x1 + dx, y1 + dy);
    const double sbb = sbb_.sum(x0 + dx, y0 + dy, x1 + dx, y1 + dy);
    double sab = 0.0;
    for (const Nonzero& p : nz_) {
      if (p.x < x0 || p.x >= x1 || p.y < y0 || p.y >= y1) continue;
      sab += p.v * b_(p.x + dx, p.y + dy);
    }
    const double n = static_cast<double>(x1 - x0) * (y1 - y0);
    const double cov = sab - sa * sb / n;
    const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
    if (!(va > 0.0 && vb > 0.0)) return 0.0;
    return cov / std::sqrt(va * vb);
  }

 private:
  const Image<double>& a_;
  const Image<double>& b_;
  Integral sa_, saa_, sb_, sbb_;
  std::vector<Nonzero> nz_;
};

double parabola_offset(double l, double c, double r) {
  const double den = l - 2.0 * c + r;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
}

}  // namespace

AlignmentCorrection update_alignment(const Image<double>& prev, const Image<double>& cur) {
  if (!prev.same_shape(cur)) throw Error(Errc::DimensionMismatch, "frames differ in shape");
  constexpr int kSide = 2 * kSearch + 1;
  double score[kSide][kSide];
  int best_x = 0, best_y = 0;
  double best = -2.0;
  const NccSearch ncc(prev, cur);
  for (int dy = -kSearch; dy <= kSearch; ++dy) {
    for (int dx = -kSearch; dx <= kSearch; ++dx) {
      const double s = ncc.at(dx, dy);
      score[dy + kSearch][dx + kSearch] = s;
      if (s > best) {
        best = s;
        best_x = dx;
        best_y = dy;
      }
    }
  }
  AlignmentCorrection out;
  if (best < kMinPeak) return out;
  const int ix = best_x + kSearch, iy = best_y + kSearch;
  double sx = 0.0, sy = 0.0;
  if (ix > 0 && ix < kSide - 1) {
    sx = parabola_offset(score[iy][ix - 1], score[iy][ix], score[iy][ix + 1]);
  }
  if (iy > 0 && iy < kSide - 1) {
    sy = parabola_offset(score[iy - 1][ix], score[iy][ix], score[iy + 1][ix]);
  }
  out.delta = Vec2(best_x + sx, best_y + sy);
  return out;
}

AlignmentCorrection update_alignment(const EventFrame& prev, const EventFrame& cur) {
  return update_alignment(prev.grid, cur.grid);
}

GrayImage frame_to_gray(const EventFrame& frame) {
  const Image<double>& g = frame.grid;
  double mx = 0.0;
  for (double v : g.pixels()) mx = std::max(mx, v);
  GrayImage out(g.width(), g.height(), 0.0f);
  if (mx <= 0.0) return out;
  auto src = g.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(std::max(src[i], 0.0) / mx);
  }
  return out;
}

}  // namespace evio
