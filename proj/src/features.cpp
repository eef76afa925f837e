#include "evio/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "evio/error.hpp"
#include "evio/frame_enhance.hpp"
#include "evio/kernels.hpp"

namespace evio {

const std::array<std::array<int, 2>, 16>& fast_circle() {
  static const std::array<std::array<int, 2>, 16> c{{{0, -3}, {1, -3}, {2, -2}, {3, -1},
                                                     {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                                     {0, 3},  {-1, 3}, {-2, 2}, {-3, 1},
                                                     {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};
  return c;
}

namespace {

constexpr int kArc = 9;
constexpr int kCentroidRadius = 15;

// Largest summed |diff| over maximal runs of `sign` (+1 brighter, -1 darker) of length >= 9.
double best_arc(const std::array<float, 16>& diff, int sign, float t) {
  std::array<bool, 16> on{};
  int count = 0;
  for (int i = 0; i < 16; ++i) {
    on[i] = sign > 0 ? diff[i] > t : diff[i] < -t;
    count += on[i];
  }
  if (count < kArc) return 0.0;
  if (count == 16) {
    double s = 0.0;
    for (float d : diff) s += std::abs(d);
    return s;
  }
  int start = 0;
  while (on[start]) ++start;  // an off position exists
  double best = 0.0;
  int len = 0;
  double sum = 0.0;
  for (int k = 1; k <= 16; ++k) {
    const int i = (start + k) % 16;
    if (on[i]) {
      ++len;
      sum += std::abs(diff[i]);
    } else {
      if (len >= kArc) best = std::max(best, sum);
      len = 0;
      sum = 0.0;
    }
  }
  return best;
}

double centroid_angle(const GrayImage& img, int cx, int cy) {
  double m10 = 0.0, m01 = 0.0;
  for (int dy = -kCentroidRadius; dy <= kCentroidRadius; ++dy) {
    const int y = cy + dy;
    if (y < 0 || y >= img.height()) continue;
    for (int dx = -kCentroidRadius; dx <= kCentroidRadius; ++dx) {
      if (dx * dx + dy * dy > kCentroidRadius * kCentroidRadius) continue;
      const int x = cx + dx;
      if (x < 0 || x >= img.width()) continue;
      const double v = img(x, y);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  return std::atan2(m01, m10);
}

}  // namespace

std::vector<Keypoint> detect_fast(const GrayImage& img, double threshold, bool suppress) {
  const int W = img.width(), H = img.height();
  std::vector<Keypoint> out;
  if (W < 7 || H < 7) return out;
  const auto& circle = fast_circle();
  const float t = static_cast<float>(threshold);
  Image<float> resp(W, H, 0.0f);
  for (int y = 3; y < H - 3; ++y) {
    for (int x = 3; x < W - 3; ++x) {
      const float c = img(x, y);
      std::array<float, 16> diff;
      for (int i = 0; i < 16; ++i) diff[i] = img(x + circle[i][0], y + circle[i][1]) - c;
      const double r = std::max(best_arc(diff, 1, t), best_arc(diff, -1, t));
      resp(x, y) = static_cast<float>(r);
    }
  }
  for (int y = 3; y < H - 3; ++y) {
    for (int x = 3; x < W - 3; ++x) {
      const float r = resp(x, y);
      if (r <= 0.0f) continue;
      if (suppress) {
        bool keep = true;
        for (int dy = -1; dy <= 1 && keep; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const float n = resp(x + dx, y + dy);
            // Earlier raster neighbours must be strictly weaker, later ones not stronger.
            const bool earlier = dy < 0 || (dy == 0 && dx < 0);
            if (earlier ? n >= r : n > r) {
              keep = false;
              break;
            }
          }
        }
        if (!keep) continue;
      }
      out.push_back(Keypoint{Vec2(x, y), r, centroid_angle(img, x, y), 0});
    }
  }
  return out;
}

int hamming(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

const std::vector<BriefPair>& brief_pattern() {
  static const std::vector<BriefPair> pattern = [] {
    constexpr double kSigma = 6.0;
    constexpr double kRadius = 15.0;
    constexpr double kTwoPi = 6.283185307179586476925;
    std::mt19937 gen(kBriefSeed);
    auto uniform = [&gen] { return (static_cast<double>(gen()) + 0.5) / 4294967296.0; };
    auto draw = [&] {
      for (;;) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double a = kTwoPi * uniform();
        const Vec2 p(kSigma * r * std::cos(a), kSigma * r * std::sin(a));
        if (p.norm() <= kRadius) return p;
      }
    };
    std::vector<BriefPair> out;
    out.reserve(256);
    while (out.size() < 256) {
      const Vec2 a = draw();
      const Vec2 b = draw();
      if ((a - b).norm() < 1.0) continue;
      out.push_back({a, b});
    }
    return out;
  }();
  return pattern;
}

std::vector<std::optional<Descriptor>> orb_describe(const GrayImage& img,
                                                    std::span<const Keypoint> kps,
                                                    std::size_t* skipped) {
  std::vector<std::optional<Descriptor>> out(kps.size());
  std::size_t bad = 0;
  const GrayImage smooth = gaussian_blur(img, 2.0);
  const auto& pattern = brief_pattern();
  for (std::size_t k = 0; k < kps.size(); ++k) {
    const Vec2& p = kps[k].position;
    if (p.x() < kBriefMargin || p.y() < kBriefMargin || p.x() > img.width() - 1 - kBriefMargin ||
        p.y() > img.height() - 1 - kBriefMargin) {
      ++bad;
      continue;
    }
    const double c = std::cos(kps[k].orientation), s = std::sin(kps[k].orientation);
    auto at = [&](const Vec2& q) {
      return sample_bilinear(smooth, p.x() + c * q.x() - s * q.y(), p.y() + s * q.x() + c * q.y());
    };
    Descriptor d{};
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      if (at(pattern[i].a) < at(pattern[i].b)) d[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    out[k] = d;
  }
  if (skipped != nullptr) *skipped = bad;
  return out;
}

std::vector<Keypoint> grid_select(std::span<const Keypoint> kps, int rows, int cols, int width,
                                  int height) {
  if (rows < 1 || cols < 1) throw Error(Errc::InvalidArgument, "grid must be at least 1x1");
  if (width < 1 || height < 1) throw Error(Errc::InvalidArgument, "image size must be positive");
  std::vector<const Keypoint*> best(static_cast<std::size_t>(rows) * cols, nullptr);
  for (const Keypoint& k : kps) {
    const int r = std::clamp(static_cast<int>(std::floor(k.position.y() * rows / height)), 0, rows - 1);
    const int c = std::clamp(static_cast<int>(std::floor(k.position.x() * cols / width)), 0, cols - 1);
    const Keypoint*& slot = best[static_cast<std::size_t>(r) * cols + c];
    if (slot == nullptr || k.response > slot->response ||
        (k.response == slot->response &&
         std::pair(k.position.y(), k.position.x()) < std::pair(slot->position.y(), slot->position.x()))) {
      slot = &k;
    }
  }
  std::vector<Keypoint> out;
  for (const Keypoint* k : best) {
    if (k != nullptr) out.push_back(*k);
  }
  return out;
}

Pyramid build_pyramid(const GrayImage& img, int levels) {
  if (levels < 1) throw Error(Errc::InvalidArgument, "pyramid needs at least one level");
  static const std::array<float, 5> taps{1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  const auto& k = kernels::active();
  Pyramid pyr;
  pyr.levels.push_back(img);
  for (int l = 1; l < levels; ++l) {
    const GrayImage& src = pyr.levels.back();
    if (src.width() < 2 || src.height() < 2) break;
    GrayImage tmp(src.width(), src.height()), blur(src.width(), src.height());
    k.convolve_rows(src.data(), tmp.data(), src.width(), src.height(), std::span<const float>(taps));
    k.convolve_cols(tmp.data(), blur.data(), src.width(), src.height(), std::span<const float>(taps));
    GrayImage dst((src.width() + 1) / 2, (src.height() + 1) / 2);
    for (int y = 0; y < dst.height(); ++y) {
      for (int x = 0; x < dst.width(); ++x) dst(x, y) = blur(2 * x, 2 * y);
    }
    pyr.levels.push_back(std::move(dst));
  }
  return pyr;
}

namespace {

// Samples img at (x + i, y + j) for i, j in [-r, r] into out, row-major. All samples share
// the same subpixel weights, so interior windows skip the per-sample clamping.
void sample_grid(const GrayImage& img, double x, double y, int r, float* out) {
  const int w = img.width(), h = img.height();
  if (!(std::abs(x) < 1e6 && std::abs(y) < 1e6)) {
    std::fill(out, out + (2 * r + 1) * (2 * r + 1), std::numeric_limits<float>::quiet_NaN());
    return;
  }
  const double fxd = std::floor(x), fyd = std::floor(y);
  const int ix = static_cast<int>(fxd), iy = static_cast<int>(fyd);
  if (ix - r < 0 || iy - r < 0 || ix + r + 1 > w - 1 || iy + r + 1 > h - 1) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) *out++ = sample_bilinear(img, x + dx, y + dy);
    }
    return;
  }
  const float fx = static_cast<float>(x - fxd);
  const float fy = static_cast<float>(y - fyd);
  for (int dy = -r; dy <= r; ++dy) {
    const float* r0 = img.row(iy + dy) + ix;
    const float* r1 = img.row(iy + dy + 1) + ix;
    for (int dx = -r; dx <= r; ++dx) {
      const float top = r0[dx] + fx * (r0[dx + 1] - r0[dx]);
      const float bottom = r1[dx] + fx * (r1[dx + 1] - r1[dx]);
      *out++ = top + fy * (bottom - top);
    }
  }
}

KltResult track_one(const Pyramid& prev, const Pyramid& next, const Vec2& pt, const Vec2& guess,
                    const KltParams& p) {
  const int levels = static_cast<int>(std::min(prev.levels.size(), next.levels.size()));
  const int half = p.window / 2;
  const int side = 2 * half + 1;
  const int n = side * side;
  KltResult res;
  Vec2 d = (guess - pt) / static_cast<double>(1 << (levels - 1));
  std::vector<float> t(n), gx(n), gy(n), cur(n), ext((side + 2) * (side + 2));
  for (int l = levels - 1; l >= 0; --l) {
    const GrayImage& A = prev.levels[l];
    const GrayImage& B = next.levels[l];
    const double scale = 1.0 / (1 << l);
    const Vec2 x = pt * scale;
    sample_grid(A, x.x(), x.y(), half + 1, ext.data());
    double h11 = 0, h12 = 0, h22 = 0;
    int i = 0;
    for (int r = 1; r <= side; ++r) {
      const float* row = ext.data() + r * (side + 2);
      const float* up = row - (side + 2);
      const float* down = row + (side + 2);
      for (int c = 1; c <= side; ++c, ++i) {
        t[i] = row[c];
        gx[i] = 0.5f * (row[c + 1] - row[c - 1]);
        gy[i] = 0.5f * (down[c] - up[c]);
        h11 += gx[i] * gx[i];
        h12 += gx[i] * gy[i];
        h22 += gy[i] * gy[i];
      }
    }
    const double tr = 0.5 * (h11 + h22);
    const double det = h11 * h22 - h12 * h12;
    const double min_eig = tr - std::sqrt(std::max(0.0, tr * tr - det));
    if (!(min_eig / n >= p.min_eigen)) {
      res.point = pt + d / scale;
      res.live = false;
      return res;
    }
    for (int it = 0; it < p.max_iters; ++it) {
      double b1 = 0, b2 = 0;
      sample_grid(B, x.x() + d.x(), x.y() + d.y(), half, cur.data());
      for (int j = 0; j < n; ++j) {
        const double e = cur[j] - t[j];
        b1 += gx[j] * e;
        b2 += gy[j] * e;
      }
      const Vec2 delta((h22 * b1 - h12 * b2) / det, (h11 * b2 - h12 * b1) / det);
      d -= delta;
      if (delta.norm() < p.eps) break;
    }
    if (l > 0) d *= 2.0;
  }
  res.point = pt + d;
  const GrayImage& A = prev.levels[0];
  const GrayImage& B = next.levels[0];
  sample_grid(A, pt.x(), pt.y(), half, t.data());
  sample_grid(B, res.point.x(), res.point.y(), half, cur.data());
  double ss = 0.0, st = 0.0, sc = 0.0, stt = 0.0, scc = 0.0, stc = 0.0;
  for (int j = 0; j < n; ++j) {
    const double e = cur[j] - t[j];
    ss += e * e;
    st += t[j];
    sc += cur[j];
    stt += static_cast<double>(t[j]) * t[j];
    scc += static_cast<double>(cur[j]) * cur[j];
    stc += static_cast<double>(t[j]) * cur[j];
  }
  res.residual = std::sqrt(ss / n);
  const double vt = stt - st * st / n, vc = scc - sc * sc / n;
  res.ncc = vt > 0.0 && vc > 0.0 ? (stc - st * sc / n) / std::sqrt(vt * vc) : 0.0;
  const bool inside = res.point.x() >= 0.0 && res.point.y() >= 0.0 &&
                      res.point.x() <= B.width() - 1 && res.point.y() <= B.height() - 1;
  res.live = inside && res.point.allFinite() && res.residual <= p.max_residual && res.ncc >= p.min_ncc;
  return res;
}

}  // namespace

std::vector<KltResult> klt_track(const Pyramid& prev, const Pyramid& next,
                                 std::span<const Vec2> points, const KltParams& params,
                                 std::span<const Vec2> guesses) {
  if (prev.levels.empty() || next.levels.empty() || !prev.levels[0].same_shape(next.levels[0])) {
    throw Error(Errc::DimensionMismatch, "pyramids differ in shape");
  }
  if (!guesses.empty() && guesses.size() != points.size()) {
    throw Error(Errc::InvalidArgument, "one guess per point required");
  }
  if (params.window < 3 || params.window % 2 == 0) {
    throw Error(Errc::InvalidArgument, "KLT window must be odd and >= 3");
  }
  std::vector<KltResult> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = track_one(prev, next, points[i], guesses.empty() ? points[i] : guesses[i], params);
  }
  return out;
}

FeatureTracker::FeatureTracker(TrackerConfig cfg) : cfg_(cfg) {}

std::vector<int> FeatureTracker::live_ids() const {
  std::vector<int> ids;
  for (const Track& t : tracks_) {
    if (t.status == TrackStatus::Live) ids.push_back(t.id);
  }
  return ids;
}

void FeatureTracker::mark_lost(int id) {
  tracks_.at(static_cast<std::size_t>(id)).status = TrackStatus::Lost;
}

void FeatureTracker::step(const GrayImage& img, const std::unordered_map<int, Vec2>& guesses) {
  ++frame_;
  new_ids_.clear();
  Pyramid pyr = build_pyramid(img, cfg_.klt.levels);

  if (frame_ > 0) {
    std::vector<int> ids = live_ids();
    std::vector<Vec2> pts, init;
    for (int id : ids) {
      pts.push_back(tracks_[id].positions.back());
      auto g = guesses.find(id);
      init.push_back(g != guesses.end() ? g->second : pts.back());
    }
    const auto res = klt_track(pyramid_, pyr, pts, cfg_.klt, init);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Track& t = tracks_[ids[k]];
      t.last_residual = res[k].residual;
      if (!res[k].live) {
        t.status = TrackStatus::Lost;
        continue;
      }
      t.frames.push_back(frame_);
      t.positions.push_back(res[k].point);
    }
  }
  pyramid_ = std::move(pyr);

  const int W = img.width(), H = img.height();
  const int R = cfg_.grid_rows, C = cfg_.grid_cols;
  std::vector<bool> occupied(static_cast<std::size_t>(R) * C, false);
  auto cell = [&](const Vec2& p) {
    const int r = std::clamp(static_cast<int>(std::floor(p.y() * R / H)), 0, R - 1);
    const int c = std::clamp(static_cast<int>(std::floor(p.x() * C / W)), 0, C - 1);
    return static_cast<std::size_t>(r) * C + c;
  };
  for (const Track& t : tracks_) {
    if (t.status == TrackStatus::Live) occupied[cell(t.positions.back())] = true;
  }
  std::vector<Keypoint> cand;
  for (const Keypoint& k : detect_fast(img, cfg_.fast_threshold)) {
    const Vec2& p = k.position;
    if (p.x() < cfg_.border || p.y() < cfg_.border || p.x() > W - 1 - cfg_.border ||
        p.y() > H - 1 - cfg_.border) {
      continue;
    }
    if (!occupied[cell(p)]) cand.push_back(k);
  }
  for (const Keypoint& k : grid_select(cand, R, C, W, H)) {
    Track t;
    t.id = static_cast<int>(tracks_.size());
    t.frames.push_back(frame_);
    t.positions.push_back(k.position);
    t.response = k.response;
    new_ids_.push_back(t.id);
    tracks_.push_back(std::move(t));
  }
}

}  // namespace evio
