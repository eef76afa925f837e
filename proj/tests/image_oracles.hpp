#pragma once

// Test-side image, feature and 1-D search references shared by the unit tests and the
// acceptance run. Written directly from the definitions; no library code is reused.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "evio/features.hpp"
#include "evio/image.hpp"

namespace oracle {

using evio::GrayImage;
using evio::Keypoint;
using evio::Vec2;

// Direct 2-D Gaussian on a replicated border, double precision.
inline GrayImage dense_gaussian(const GrayImage& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  double s = 0;
  for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
  for (double& v : k) v /= s;
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0;
      for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) acc += k[i + r] * k[j + r] * img.clamped(x + i, y + j);
      }
      out(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

// Textbook global equalization on 8-bit levels.
inline GrayImage global_equalize(const GrayImage& img) {
  std::vector<int> hist(256, 0);
  auto level = [](float v) { return std::clamp(int(std::lround(v * 255.0)), 0, 255); };
  for (float v : img.pixels()) ++hist[level(v)];
  std::vector<int> cdf(256);
  int run = 0;
  for (int b = 0; b < 256; ++b) cdf[b] = run += hist[b];
  int cdf_min = 0;
  for (int b = 0; b < 256; ++b) {
    if (cdf[b] > 0) {
      cdf_min = cdf[b];
      break;
    }
  }
  const int n = static_cast<int>(img.size());
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int b = level(img.pixels()[i]);
    const double v = std::round(double(cdf[b] - cdf_min) / (n - cdf_min) * 255.0) / 255.0;
    out.pixels()[i] = static_cast<float>(v);
  }
  return out;
}

// Small reference Canny: explicit per-pixel gradient, 4-sector NMS, hysteresis by flood fill.
inline GrayImage canny_reference(const GrayImage& img, double low, double high) {
  const int W = img.width(), H = img.height();
  std::vector<double> gx(W * H), gy(W * H), mag(W * H);
  double mx = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      auto p = [&](int i, int j) { return double(img.clamped(x + i, y + j)); };
      const double a = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      const double b = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      gx[y * W + x] = a;
      gy[y * W + x] = b;
      mag[y * W + x] = std::hypot(a, b);
      mx = std::max(mx, mag[y * W + x]);
    }
  }
  if (mx > 0) for (double& m : mag) m /= mx;
  auto M = [&](int x, int y) {
    return mag[std::clamp(y, 0, H - 1) * W + std::clamp(x, 0, W - 1)];
  };
  std::vector<int> cls(W * H, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double m = M(x, y);
      if (m <= 0 || m < low) continue;
      double deg = std::atan2(gy[y * W + x], gx[y * W + x]) * 180.0 / M_PI;
      if (deg < 0) deg += 180.0;
      int dx, dy;
      if (deg < 22.5 || deg >= 157.5) {
        dx = 1, dy = 0;
      } else if (deg < 67.5) {
        dx = 1, dy = 1;
      } else if (deg < 112.5) {
        dx = 0, dy = 1;
      } else {
        dx = -1, dy = 1;
      }
      if (m > M(x - dx, y - dy) && m >= M(x + dx, y + dy)) cls[y * W + x] = m >= high ? 2 : 1;
    }
  }
  GrayImage out(W, H, 0.0f);
  bool grew = true;
  for (int i = 0; i < W * H; ++i) if (cls[i] == 2) out.data()[i] = 1.0f;
  while (grew) {
    grew = false;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (cls[y * W + x] != 1 || out(x, y) != 0.0f) continue;
        for (int j = -1; j <= 1 && out(x, y) == 0.0f; ++j) {
          for (int i = -1; i <= 1; ++i) {
            const int u = x + i, v = y + j;
            if (u < 0 || v < 0 || u >= W || v >= H || out(u, v) == 0.0f) continue;
            out(x, y) = 1.0f;
            grew = true;
            break;
          }
        }
      }
    }
  }
  return out;
}

inline double texture(double x, double y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  double v = 0.5;
  for (int k = 0; k < 8; ++k) {
    const double fx = 0.05 + 0.25 * u(rng), fy = 0.05 + 0.25 * u(rng), ph = 6.28 * u(rng);
    v += 0.06 * std::sin(fx * x + fy * y + ph) + 0.04 * std::cos(fy * x - fx * y + 2 * ph);
  }
  return std::clamp(v, 0.0, 1.0);
}

inline GrayImage texture_image(int w, int h, double sx, double sy, std::uint64_t seed) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img(x, y) = static_cast<float>(texture(x - sx, y - sy, seed));
  }
  return img;
}

inline std::vector<Keypoint> random_keypoints(std::mt19937_64& rng, int n, int w, int h, int levels) {
  std::uniform_real_distribution<double> ux(0, w), uy(0, h);
  std::uniform_int_distribution<int> ur(1, levels);
  std::vector<Keypoint> kps(n);
  for (auto& k : kps) {
    k.position = Vec2(std::floor(ux(rng)), std::floor(uy(rng)));
    k.response = static_cast<float>(ur(rng));
  }
  return kps;
}

// Per-cell argmax with the (y, x) tie rule, by scanning every keypoint for every cell.
inline std::vector<Keypoint> grid_oracle(const std::vector<Keypoint>& kps, int R, int C, int W, int H) {
  std::vector<Keypoint> out;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      const Keypoint* best = nullptr;
      for (const Keypoint& k : kps) {
        const int kr = std::min(R - 1, int(std::floor(k.position.y() * R / H)));
        const int kc = std::min(C - 1, int(std::floor(k.position.x() * C / W)));
        if (kr != r || kc != c) continue;
        if (!best || k.response > best->response ||
            (k.response == best->response &&
             (k.position.y() < best->position.y() ||
              (k.position.y() == best->position.y() && k.position.x() < best->position.x())))) {
          best = &k;
        }
      }
      if (best) out.push_back(*best);
    }
  }
  return out;
}

inline bool same_keypoints(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].position != b[i].position || a[i].response != b[i].response) return false;
  }
  return true;
}

// Golden-section search on a bracketing interval.
double golden_minimize(auto&& f, double a, double b) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace oracle
