#include "evio/frame_enhance.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <vector>

#include "evio/error.hpp"
#include "evio/kernels.hpp"

namespace evio {

std::string_view to_string(EdgeMethod m) {
  switch (m) {
    case EdgeMethod::Sobel: return "sobel";
    case EdgeMethod::Laplacian: return "laplacian";
    case EdgeMethod::Canny: return "canny";
    case EdgeMethod::ClaheOnly: return "clahe";
  }
  return "sobel";
}

EdgeMethod parse_edge_method(std::string_view name) {
  std::string s(name);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "sobel") return EdgeMethod::Sobel;
  if (s == "laplacian") return EdgeMethod::Laplacian;
  if (s == "canny") return EdgeMethod::Canny;
  if (s == "clahe" || s == "clahe-only" || s == "clahe_only") return EdgeMethod::ClaheOnly;
  throw Error(Errc::InvalidArgument, "unknown edge method: " + std::string(name));
}

void validate(const EnhanceConfig& cfg) {
  auto fail = [](const char* what) { throw Error(Errc::InvalidArgument, what); };
  if (!(cfg.sigma > 0.0)) fail("enhance.sigma must be > 0");
  if (!(cfg.lambda >= 0.0)) fail("enhance.lambda must be >= 0");
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) fail("enhance.alpha and enhance.beta must be >= 0");
  if (cfg.erode_size < 1 || cfg.erode_size % 2 == 0) fail("enhance.erode_size must be odd and >= 1");
  if (cfg.clahe_tile_rows < 1 || cfg.clahe_tile_cols < 1) fail("enhance.clahe tiles must be >= 1");
  if (!(cfg.clahe_clip >= 1.0)) fail("enhance.clahe_clip must be >= 1");
  if (!(cfg.canny_low >= 0.0 && cfg.canny_low <= cfg.canny_high)) {
    fail("enhance canny thresholds must satisfy 0 <= low <= high");
  }
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::InvalidArgument, "sigma must be > 0");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * r + 1);
  double sum = 0.0;
  for (int k = -r; k <= r; ++k) {
    w[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += w[k + r];
  }
  std::vector<float> taps(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) taps[i] = static_cast<float>(w[i] / sum);

  const auto& k = kernels::active();
  GrayImage tmp(img.width(), img.height());
  GrayImage out(img.width(), img.height());
  k.convolve_rows(img.data(), tmp.data(), img.width(), img.height(), taps);
  k.convolve_cols(tmp.data(), out.data(), img.width(), img.height(), taps);
  return out;
}

namespace {

constexpr int kBins = 256;

int bin_of(float v) {
  return std::clamp(static_cast<int>(std::lround(static_cast<double>(v) * 255.0)), 0, kBins - 1);
}

// Equalization map of one tile; identity when the tile holds a single gray level.
std::array<float, kBins> tile_map(const GrayImage& img, int x0, int y0, int tw, int th,
                                  double clip) {
  std::array<double, kBins> hist{};
  for (int y = y0; y < y0 + th; ++y) {
    for (int x = x0; x < x0 + tw; ++x) hist[bin_of(img.clamped(x, y))] += 1.0;
  }
  std::array<float, kBins> map{};
  const int occupied =
      static_cast<int>(std::count_if(hist.begin(), hist.end(), [](double h) { return h > 0.0; }));
  if (occupied <= 1) {
    for (int b = 0; b < kBins; ++b) map[b] = static_cast<float>(b / 255.0);
    return map;
  }
  const double n = static_cast<double>(tw) * th;
  if (std::isfinite(clip)) {
    const double limit = clip * n / kBins;
    double excess = 0.0;
    for (double& h : hist) {
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    }
    const double add = excess / kBins;
    for (double& h : hist) h += add;
  }
  double cdf_min = 0.0;
  for (double h : hist) {
    if (h > 0.0) {
      cdf_min = h;
      break;
    }
  }
  const double den = n - cdf_min;
  double cdf = 0.0;
  for (int b = 0; b < kBins; ++b) {
    cdf += hist[b];
    map[b] = den > 0.0 ? static_cast<float>(std::clamp((cdf - cdf_min) / den, 0.0, 1.0))
                       : static_cast<float>(b / 255.0);
  }
  return map;
}

}  // namespace

GrayImage clahe(const GrayImage& img, int tile_rows, int tile_cols, double clip) {
  if (tile_rows < 1 || tile_cols < 1) throw Error(Errc::InvalidArgument, "tile grid must be >= 1");
  if (!(clip >= 1.0)) throw Error(Errc::InvalidArgument, "clip limit must be >= 1");
  const int W = img.width(), H = img.height();
  tile_rows = std::min(tile_rows, H);
  tile_cols = std::min(tile_cols, W);
  const int th = (H + tile_rows - 1) / tile_rows;
  const int tw = (W + tile_cols - 1) / tile_cols;

  std::vector<std::array<float, kBins>> maps(static_cast<std::size_t>(tile_rows) * tile_cols);
  for (int r = 0; r < tile_rows; ++r) {
    for (int c = 0; c < tile_cols; ++c) {
      maps[static_cast<std::size_t>(r) * tile_cols + c] = tile_map(img, c * tw, r * th, tw, th, clip);
    }
  }

  GrayImage out(W, H);
  for (int y = 0; y < H; ++y) {
    const double gy = std::clamp((y + 0.5) / th - 0.5, 0.0, tile_rows - 1.0);
    const int r0 = std::min(static_cast<int>(gy), tile_rows - 1);
    const int r1 = std::min(r0 + 1, tile_rows - 1);
    const double wy = gy - r0;
    for (int x = 0; x < W; ++x) {
      const double gx = std::clamp((x + 0.5) / tw - 0.5, 0.0, tile_cols - 1.0);
      const int c0 = std::min(static_cast<int>(gx), tile_cols - 1);
      const int c1 = std::min(c0 + 1, tile_cols - 1);
      const double wx = gx - c0;
      const int b = bin_of(img(x, y));
      auto m = [&](int r, int c) { return maps[static_cast<std::size_t>(r) * tile_cols + c][b]; };
      const double top = (1.0 - wx) * m(r0, c0) + wx * m(r0, c1);
      const double bot = (1.0 - wx) * m(r1, c0) + wx * m(r1, c1);
      out(x, y) = static_cast<float>(std::clamp((1.0 - wy) * top + wy * bot, 0.0, 1.0));
    }
  }
  return out;
}

GrayImage sharpen(const GrayImage& i_clahe, const GrayImage& i_blur, double lambda) {
  if (!i_clahe.same_shape(i_blur)) throw Error(Errc::DimensionMismatch, "sharpen inputs differ in shape");
  GrayImage out(i_clahe.width(), i_clahe.height());
  auto a = i_clahe.pixels();
  auto b = i_blur.pixels();
  auto o = out.pixels();
  const float l = static_cast<float>(lambda);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + l * (a[i] - b[i]);
  kernels::active().clamp01(out.data(), out.size());
  return out;
}

namespace {

void normalize_by_max(GrayImage& img) {
  float mx = 0.0f;
  for (float v : img.pixels()) mx = std::max(mx, v);
  if (mx <= 0.0f) return;
  for (float& v : img.pixels()) v /= mx;
}

}  // namespace

GrayImage sobel_magnitude(const GrayImage& img) {
  GrayImage mag(img.width(), img.height());
  kernels::active().sobel(img.data(), nullptr, nullptr, mag.data(), img.width(), img.height());
  normalize_by_max(mag);
  return mag;
}

GrayImage laplacian_magnitude(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  kernels::active().laplacian_abs(img.data(), out.data(), img.width(), img.height());
  normalize_by_max(out);
  return out;
}

GrayImage canny(const GrayImage& img, double low, double high) {
  const int W = img.width(), H = img.height();
  GrayImage gx(W, H), gy(W, H), mag(W, H);
  kernels::active().sobel(img.data(), gx.data(), gy.data(), mag.data(), W, H);
  normalize_by_max(mag);

  // 0: none, 1: weak, 2: strong
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(W) * H, 0);
  constexpr double kPi = 3.14159265358979323846;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const float m = mag(x, y);
      if (m <= 0.0f || m < low) continue;
      double ang = std::atan2(static_cast<double>(gy(x, y)), static_cast<double>(gx(x, y)));
      if (ang < 0.0) ang += kPi;
      const int sector = static_cast<int>(std::floor(ang / (kPi / 4.0) + 0.5)) % 4;
      int dx = 0, dy = 0;
      switch (sector) {
        case 0: dx = 1; dy = 0; break;
        case 1: dx = 1; dy = 1; break;
        case 2: dx = 0; dy = 1; break;
        default: dx = -1; dy = 1; break;
      }
      const float before = mag.clamped(x - dx, y - dy);
      const float after = mag.clamped(x + dx, y + dy);
      // Strict on one side so plateaus of equal magnitude yield a single-pixel line.
      if (!(m > before && m >= after)) continue;
      cls[static_cast<std::size_t>(y) * W + x] = m >= high ? 2 : 1;
    }
  }

  GrayImage out(W, H, 0.0f);
  std::vector<int> stack;
  for (int i = 0; i < W * H; ++i) {
    if (cls[i] == 2) {
      out.data()[i] = 1.0f;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % W, y = i / W;
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        const int nx = x + ox, ny = y + oy;
        if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
        const int j = ny * W + nx;
        if (cls[j] == 1 && out.data()[j] == 0.0f) {
          out.data()[j] = 1.0f;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

GrayImage edge_detect(const GrayImage& img, EdgeMethod method, double canny_low,
                      double canny_high) {
  switch (method) {
    case EdgeMethod::Sobel: return sobel_magnitude(img);
    case EdgeMethod::Laplacian: return laplacian_magnitude(img);
    case EdgeMethod::Canny: return canny(img, canny_low, canny_high);
    case EdgeMethod::ClaheOnly: return img;
  }
  return img;
}

GrayImage erode(const GrayImage& img, int size) {
  if (size < 1 || size % 2 == 0) throw Error(Errc::InvalidArgument, "erosion size must be odd and >= 1");
  if (size == 1) return img;
  const auto& k = kernels::active();
  GrayImage tmp(img.width(), img.height()), out(img.width(), img.height());
  k.min_rows(img.data(), tmp.data(), img.width(), img.height(), size / 2);
  k.min_cols(tmp.data(), out.data(), img.width(), img.height(), size / 2);
  return out;
}

GrayImage blend(const GrayImage& a, const GrayImage& b, double alpha, double beta) {
  if (!a.same_shape(b)) throw Error(Errc::DimensionMismatch, "blend inputs differ in shape");
  GrayImage out(a.width(), a.height());
  const auto& k = kernels::active();
  k.blend(a.data(), b.data(), static_cast<float>(alpha), static_cast<float>(beta), out.data(),
          out.size());
  k.clamp01(out.data(), out.size());
  return out;
}

EnhanceStages enhance_event_frame_stages(const GrayImage& img, const EnhanceConfig& cfg) {
  validate(cfg);
  EnhanceStages s;
  s.blur = gaussian_blur(img, cfg.sigma);
  s.clahe = clahe(s.blur, cfg.clahe_tile_rows, cfg.clahe_tile_cols, cfg.clahe_clip);
  s.enhanced = cfg.lambda > 0.0 ? sharpen(s.clahe, s.blur, cfg.lambda) : s.clahe;
  s.edge = edge_detect(s.enhanced, cfg.method, cfg.canny_low, cfg.canny_high);
  if (cfg.thinning) s.edge = erode(s.edge, cfg.erode_size);
  s.output = blend(img, s.edge, cfg.alpha, cfg.beta);
  return s;
}

GrayImage enhance_event_frame(const GrayImage& img, const EnhanceConfig& cfg) {
  return enhance_event_frame_stages(img, cfg).output;
}

}  // namespace evio
