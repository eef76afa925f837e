#include "evio/depth_prior.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "evio/error.hpp"

namespace evio {

ConstantDepth::ConstantDepth(double depth, int width, int height)
    : depth_(depth), width_(width), height_(height) {
  if (!(depth > 0.0)) throw Error(Errc::NonPositiveDepth, "constant depth must be positive");
}

DepthMap ConstantDepth::depth_at(TimeNs) const {
  return DepthMap(width_, height_, static_cast<float>(depth_));
}

FileDepth::FileDepth(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(Errc::Io, "depth directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".pgm") continue;
    const std::string stem = entry.path().stem().string();
    TimeNs t = 0;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), t);
    if (ec != std::errc() || ptr != stem.data() + stem.size()) continue;
    frames_.emplace_back(t, entry.path());
  }
  std::sort(frames_.begin(), frames_.end());
  if (frames_.empty()) throw Error(Errc::Io, "no depth frames in " + dir.string());
}

DepthMap FileDepth::depth_at(TimeNs t) const {
  auto it = std::lower_bound(frames_.begin(), frames_.end(), t,
                             [](const auto& f, TimeNs v) { return f.first < v; });
  if (it == frames_.end()) {
    --it;
  } else if (it != frames_.begin() && (t - std::prev(it)->first) < (it->first - t)) {
    --it;
  }
  const auto index = static_cast<std::size_t>(it - frames_.begin());
  if (index != cached_index_) {
    cached_ = depth_from_pgm16(read_pgm16(it->second));
    cached_index_ = index;
  }
  return cached_;
}

DepthMap depth_from_pgm16(const Image<std::uint16_t>& mm) {
  DepthMap out(mm.width(), mm.height());
  auto src = mm.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) * 1e-3f;
  return out;
}

Image<std::uint16_t> depth_to_pgm16(const DepthMap& depth) {
  Image<std::uint16_t> out(depth.width(), depth.height());
  auto src = depth.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!valid_depth(src[i])) {
      dst[i] = 0;
      continue;
    }
    const double mm = std::round(static_cast<double>(src[i]) * 1e3);
    dst[i] = static_cast<std::uint16_t>(std::clamp(mm, 1.0, 65535.0));
  }
  return out;
}

double roi_mean_depth(const DepthMap& depth, double roi_fraction) {
  if (!(roi_fraction > 0.0 && roi_fraction <= 1.0)) {
    throw Error(Errc::InvalidArgument, "ROI fraction must be in (0, 1]");
  }
  const int w = std::max(1, static_cast<int>(std::lround(roi_fraction * depth.width())));
  const int h = std::max(1, static_cast<int>(std::lround(roi_fraction * depth.height())));
  const int x0 = (depth.width() - w) / 2;
  const int y0 = (depth.height() - h) / 2;
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      const float d = depth(x, y);
      if (!valid_depth(d)) continue;
      sum += d;
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::EmptyRoi, "no valid depth inside ROI");
  return sum / static_cast<double>(n);
}

double smooth_depth(double d_bar, DepthState& state) {
  const double prev = state.d_prev.value_or(d_bar);
  const double d = state.alpha * d_bar + (1.0 - state.alpha) * prev;
  const double out = std::clamp(d, state.d_min + kDepthClampEps, state.d_max - kDepthClampEps);
  state.d_prev = out;
  return out;
}

double depth_residual(const DepthResidualTerm& term) {
  const double r = term.rho_bar - term.scale * term.rho_roi;
  return r * r / term.sigma;
}

double estimate_scale(std::span<const ScaleSample> samples) {
  double num = 0.0, den = 0.0;
  for (const ScaleSample& s : samples) {
    num += s.rho_bar * s.rho_roi / s.sigma;
    den += s.rho_roi * s.rho_roi / s.sigma;
  }
  if (!(den >= 1e-12)) throw Error(Errc::DegenerateScale, "no informative scale samples");
  return num / den;
}

double prior_sigma(const DepthPriorConfig& cfg, double d_bar) {
  return cfg.sigma_mode == SigmaMode::Constant ? cfg.sigma : cfg.sigma * d_bar * d_bar;
}

}  // namespace evio
