#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "evio/geometry.hpp"
#include "evio/image.hpp"

namespace evio {

/// Per-pixel z-depth in meters; 0 (or any non-finite / non-positive value) marks invalid.
using DepthMap = Image<float>;

inline bool valid_depth(float d) { return d > 0.0f && d < 1e30f; }

/// Seam for the learned event-to-depth model: anything that can produce a depth map at a time.
class DepthSource {
 public:
  virtual ~DepthSource() = default;
  virtual DepthMap depth_at(TimeNs t) const = 0;
  /// True when maps carry real per-pixel structure (not a single broadcast value).
  virtual bool per_pixel() const { return true; }
};

class ConstantDepth final : public DepthSource {
 public:
  ConstantDepth(double depth, int width, int height);
  DepthMap depth_at(TimeNs t) const override;
  bool per_pixel() const override { return false; }
  double depth() const { return depth_; }

 private:
  double depth_;
  int width_, height_;
};

/// Directory of PGM16 maps in millimeters named `<t_ns>.pgm`; returns the map nearest in time.
class FileDepth final : public DepthSource {
 public:
  explicit FileDepth(const std::filesystem::path& dir);
  DepthMap depth_at(TimeNs t) const override;
  std::size_t frame_count() const { return frames_.size(); }

 private:
  std::vector<std::pair<TimeNs, std::filesystem::path>> frames_;
  // Last decoded map; sources are used from one thread at a time.
  mutable std::size_t cached_index_ = static_cast<std::size_t>(-1);
  mutable DepthMap cached_;
};

DepthMap depth_from_pgm16(const Image<std::uint16_t>& mm);
Image<std::uint16_t> depth_to_pgm16(const DepthMap& depth);

/// Mean of valid pixels inside the centred rectangle covering `roi_fraction` of each dimension.
/// Throws EmptyRoi when no valid pixel is inside.
double roi_mean_depth(const DepthMap& depth, double roi_fraction);

struct DepthState {
  std::optional<double> d_prev;  // d_{t-1}; unset before the first update
  double alpha = 0.3;
  double d_min = 0.2;
  double d_max = 20.0;
};

inline constexpr double kDepthClampEps = 1e-6;

/// d_t = alpha * d_bar + (1 - alpha) * d_prev, clamped into (d_min, d_max). Updates state.
double smooth_depth(double d_bar, DepthState& state);

struct DepthResidualTerm {
  double rho_bar = 1.0;  // mean landmark inverse depth in the keyframe (1/m)
  double rho_roi = 1.0;  // inverse of the smoothed ROI depth (1/m)
  double scale = 1.0;
  double sigma = 0.05 * 0.05;
};

/// (rho_bar - s * rho_roi)^2 / sigma
double depth_residual(const DepthResidualTerm& term);

struct ScaleSample {
  double rho_bar = 0.0;
  double rho_roi = 0.0;
  double sigma = 1.0;
};

/// Weighted least-squares scale: sum(rho_bar rho_roi / sigma) / sum(rho_roi^2 / sigma).
/// Throws DegenerateScale when the denominator is below 1e-12.
double estimate_scale(std::span<const ScaleSample> samples);

enum class SigmaMode { Constant, ProportionalToDepthSq };

struct DepthPriorConfig {
  bool enabled = true;
  double alpha = 0.3;
  double roi_fraction = 0.25;
  double d_min = 0.2;
  double d_max = 20.0;
  double sigma = 0.05 * 0.05;
  SigmaMode sigma_mode = SigmaMode::Constant;
  int keyframe_interval = 5;
};

/// Confidence variance for a given ROI depth under the configured mode.
double prior_sigma(const DepthPriorConfig& cfg, double d_bar);

}  // namespace evio
